"""Game instances: representation, validation, random generation and file I/O.

An instance holds the candidate centers with their defender/attacker payoffs,
the quantal-response rationality ``lam``, the security budget ``m``, the
cardinality window ``[min_NP, cap_C]`` on the operated set and the regional
partitions with their coverage caps ``beta``.

Instance files are JSON documents::

    {
      "format": "qsg-instance",
      "format_version": 1,
      "n_centers": 3,
      "lambda": 0.76,
      "m": 0.3,
      "cap_C": 2,
      "min_NP": 1,
      "partitions": [[0, 1], [2]],
      "beta": [0.3, 0.3],
      "reward_def": [...], "loss_def": [...],
      "reward_att": [...], "loss_att": [...]
    }

Floats are written with ``repr`` so a write/read cycle is bit-exact.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidIndexError, InvalidInstanceError, ParseError, SizeError

FORMAT_NAME = "qsg-instance"
FORMAT_VERSION = 1

DEFAULT_LAMBDA = 0.76
DEFAULT_PARTITIONS = 5
PAYOFF_REWARD_RANGE = (1.0, 10.0)
PAYOFF_LOSS_RANGE = (-10.0, -1.0)

_PAYOFF_FIELDS = ("reward_def", "loss_def", "reward_att", "loss_att")


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GameInstance:
    reward_def: np.ndarray
    loss_def: np.ndarray
    reward_att: np.ndarray
    loss_att: np.ndarray
    lam: float
    m: float
    cap_C: int
    min_NP: int
    partitions: tuple[tuple[int, ...], ...]
    beta: np.ndarray
    # derived arrays, filled in __post_init__
    w_def: np.ndarray = field(init=False, repr=False)
    w_att: np.ndarray = field(init=False, repr=False)
    part_of: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        set_ = object.__setattr__
        for name in _PAYOFF_FIELDS:
            set_(self, name, _frozen(getattr(self, name)))
        set_(self, "beta", _frozen(self.beta))
        set_(self, "lam", float(self.lam))
        set_(self, "m", float(self.m))
        set_(self, "cap_C", int(self.cap_C))
        set_(self, "min_NP", int(self.min_NP))
        set_(self, "partitions", tuple(tuple(int(j) for j in p) for p in self.partitions))
        validate(self)
        set_(self, "w_def", _frozen(self.reward_def - self.loss_def))
        set_(self, "w_att", _frozen(self.reward_att - self.loss_att))
        part_of = np.empty(self.n_centers, dtype=np.int64)
        for l, members in enumerate(self.partitions):
            part_of[list(members)] = l
        part_of.setflags(write=False)
        set_(self, "part_of", part_of)

    @property
    def n_centers(self) -> int:
        return int(self.reward_def.shape[0])

    @property
    def n_partitions(self) -> int:
        return len(self.partitions)

    def __eq__(self, other):
        if not isinstance(other, GameInstance):
            return NotImplemented
        return (
            all(np.array_equal(getattr(self, f), getattr(other, f)) for f in _PAYOFF_FIELDS)
            and self.lam == other.lam
            and self.m == other.m
            and self.cap_C == other.cap_C
            and self.min_NP == other.min_NP
            and self.partitions == other.partitions
            and np.array_equal(self.beta, other.beta)
        )

    __hash__ = None

    def replace(self, **changes) -> "GameInstance":
        return replace(self, **changes)

    def subset_partitions(self, subset: Iterable[int]) -> np.ndarray:
        """Partition label of every member of ``subset`` (in the given order)."""
        return self.part_of[np.asarray(list(subset), dtype=np.int64)]


def validate(inst: GameInstance) -> None:
    """Raise :class:`InvalidInstanceError` if any structural invariant fails."""
    n = inst.reward_def.shape[0]
    if n < 1:
        raise InvalidInstanceError("instance needs at least one center")
    for name in _PAYOFF_FIELDS:
        arr = getattr(inst, name)
        if arr.shape != (n,):
            raise InvalidInstanceError(f"{name} has {arr.shape[0]} entries, expected {n}")
        if not np.all(np.isfinite(arr)):
            raise InvalidInstanceError(f"{name} contains non-finite values")
    for j in range(n):
        if not inst.reward_def[j] > inst.loss_def[j]:
            raise InvalidInstanceError(
                f"center {j}: reward_def={inst.reward_def[j]!r} must exceed loss_def={inst.loss_def[j]!r}"
            )
        if not inst.reward_att[j] > inst.loss_att[j]:
            raise InvalidInstanceError(
                f"center {j}: reward_att={inst.reward_att[j]!r} must exceed loss_att={inst.loss_att[j]!r}"
            )
    if not (math.isfinite(inst.lam) and inst.lam >= 0):
        raise InvalidInstanceError(f"lambda must be a finite nonnegative number, got {inst.lam!r}")
    if not (math.isfinite(inst.m) and inst.m > 0):
        raise InvalidInstanceError(f"m must be positive, got {inst.m!r}")

    seen = {}
    for l, members in enumerate(inst.partitions):
        if not members:
            raise InvalidInstanceError(f"partition {l} is empty")
        for j in members:
            if not 0 <= j < n:
                raise InvalidInstanceError(f"partition {l} references center {j} outside 0..{n - 1}")
            if j in seen:
                raise InvalidInstanceError(
                    f"center {j} appears in partitions {seen[j]} and {l}; partitions must be disjoint"
                )
            seen[j] = l
    missing = sorted(set(range(n)) - set(seen))
    if missing:
        raise InvalidInstanceError(f"centers {missing} are not covered by any partition")

    L = len(inst.partitions)
    if inst.beta.shape != (L,):
        raise InvalidInstanceError(f"beta has {inst.beta.shape[0]} entries, expected one per partition ({L})")
    if np.any(~np.isfinite(inst.beta)) or np.any(inst.beta < 0):
        raise InvalidInstanceError("beta entries must be finite and nonnegative")
    if not L <= inst.min_NP:
        raise InvalidInstanceError(
            f"min_NP={inst.min_NP} is below the number of partitions L={L}; "
            "every partition must contribute a center"
        )
    if not inst.min_NP <= inst.cap_C:
        raise InvalidInstanceError(f"min_NP={inst.min_NP} exceeds cap_C={inst.cap_C}")
    if not inst.cap_C <= n:
        raise InvalidInstanceError(f"cap_C={inst.cap_C} exceeds the number of centers {n}")


def equal_partitions(n: int, n_parts: int) -> tuple[tuple[int, ...], ...]:
    """Contiguous blocks; the first ``n % n_parts`` blocks get one extra center."""
    return tuple(tuple(int(j) for j in block) for block in np.array_split(np.arange(n), n_parts))


def generate_instance(seed: int, n_centers: int, overrides: Mapping | None = None) -> GameInstance:
    """Random instance following the experimental protocol.

    Payoffs are drawn with numpy's PCG64 generator (``np.random.default_rng``)
    in the order reward_def, loss_def, reward_att, loss_att, each a vector of
    ``n_centers`` uniforms. Rewards lie in [1, 10], losses in [-10, -1].
    Defaults: lambda=0.76, C=floor(2n/3), N_P=floor(n/2), m=n/10, five
    contiguous partitions and beta_l = 2m/L.

    ``overrides`` may set ``lam`` (or ``lambda``), ``m``, ``cap_C``,
    ``min_NP``, ``n_partitions``, ``beta`` (scalar or per-partition) and any
    payoff vector. ``beta`` defaults to 2m/L computed from the overridden m.
    """
    overrides = dict(overrides or {})
    if "lambda" in overrides:
        overrides["lam"] = overrides.pop("lambda")
    allowed = {"lam", "m", "cap_C", "min_NP", "n_partitions", "beta", *_PAYOFF_FIELDS}
    unknown = set(overrides) - allowed
    if unknown:
        raise InvalidInstanceError(f"unknown override keys: {sorted(unknown)}")

    n = int(n_centers)
    n_parts = int(overrides.get("n_partitions", DEFAULT_PARTITIONS))
    if n_parts < 1 or n < max(n_parts, 1) or ("n_partitions" not in overrides and n < DEFAULT_PARTITIONS):
        raise SizeError(f"n_centers={n} is too small for {n_parts} equal partitions")

    rng = np.random.default_rng(seed)
    payoffs = {
        "reward_def": rng.uniform(*PAYOFF_REWARD_RANGE, size=n),
        "loss_def": rng.uniform(*PAYOFF_LOSS_RANGE, size=n),
        "reward_att": rng.uniform(*PAYOFF_REWARD_RANGE, size=n),
        "loss_att": rng.uniform(*PAYOFF_LOSS_RANGE, size=n),
    }
    for name in _PAYOFF_FIELDS:
        if name in overrides:
            payoffs[name] = np.asarray(overrides[name], dtype=float)

    m = float(overrides.get("m", n / 10))
    beta = overrides.get("beta", 2 * m / n_parts)
    beta = np.broadcast_to(np.asarray(beta, dtype=float), (n_parts,))
    return GameInstance(
        lam=float(overrides.get("lam", DEFAULT_LAMBDA)),
        m=m,
        cap_C=int(overrides.get("cap_C", (2 * n) // 3)),
        min_NP=int(overrides.get("min_NP", n // 2)),
        partitions=equal_partitions(n, n_parts),
        beta=beta,
        **payoffs,
    )


def apply_fairness_scenario(inst: GameInstance, shift: float = 5.0, beta_factor: float = 1.2) -> GameInstance:
    """Make partition 0 more attractive to the attacker and tighten beta.

    Adds ``shift`` to reward_att on the first partition and sets every
    beta_l to ``beta_factor * m / L``. Not idempotent: applying it twice
    shifts reward_att twice.
    """
    reward_att = np.array(inst.reward_att)
    reward_att[list(inst.partitions[0])] += shift
    L = inst.n_partitions
    return inst.replace(reward_att=reward_att, beta=np.full(L, beta_factor * inst.m / L))


def without_fsa(inst: GameInstance) -> GameInstance:
    """Copy with every beta_l raised to m, which makes the regional caps inactive."""
    return inst.replace(beta=np.full(inst.n_partitions, inst.m))


def _check_indices(inst: GameInstance, subset: Iterable[int]) -> list[int]:
    n = inst.n_centers
    out = []
    for j in subset:
        if isinstance(j, (bool, np.bool_)) or int(j) != j:
            raise InvalidIndexError(f"center index {j!r} is not an integer")
        j = int(j)
        if not 0 <= j < n:
            raise InvalidIndexError(f"center index {j} outside 0..{n - 1}")
        out.append(j)
    return out


def feasible_subset(inst: GameInstance, subset: Iterable[int]) -> bool:
    """True iff N_P <= |S| <= C and every partition meets S."""
    members = set(_check_indices(inst, subset))
    if not inst.min_NP <= len(members) <= inst.cap_C:
        return False
    return all(members.intersection(p) for p in inst.partitions)


# --------------------------------------------------------------------------
# file format
# --------------------------------------------------------------------------


def instance_to_dict(inst: GameInstance) -> dict:
    return {
        "format": FORMAT_NAME,
        "format_version": FORMAT_VERSION,
        "n_centers": inst.n_centers,
        "lambda": inst.lam,
        "m": inst.m,
        "cap_C": inst.cap_C,
        "min_NP": inst.min_NP,
        "partitions": [list(p) for p in inst.partitions],
        "beta": inst.beta.tolist(),
        **{name: getattr(inst, name).tolist() for name in _PAYOFF_FIELDS},
    }


def _field(doc: Mapping, name: str, kind, where: str):
    if name not in doc:
        raise ParseError(f"{where}: missing field '{name}'")
    value = doc[name]
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ParseError(f"{where}: field '{name}' must be an integer, got {value!r}")
    elif kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ParseError(f"{where}: field '{name}' must be a number, got {value!r}")
        value = float(value)
    return value


def _number_list(doc: Mapping, name: str, length: int, where: str) -> list[float]:
    value = _field(doc, name, list, where)
    if not isinstance(value, list) or len(value) != length:
        raise ParseError(f"{where}: field '{name}' must be a list of {length} numbers")
    for i, v in enumerate(value):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ParseError(f"{where}: field '{name}[{i}]' must be a number, got {v!r}")
    return [float(v) for v in value]


def instance_from_dict(doc: Mapping, where: str = "<instance>") -> GameInstance:
    if not isinstance(doc, Mapping):
        raise ParseError(f"{where}: top level must be an object")
    if doc.get("format") != FORMAT_NAME:
        raise ParseError(f"{where}: field 'format' must be {FORMAT_NAME!r}")
    version = _field(doc, "format_version", int, where)
    if version != FORMAT_VERSION:
        raise ParseError(f"{where}: unsupported format_version {version}")
    n = _field(doc, "n_centers", int, where)
    partitions = _field(doc, "partitions", list, where)
    if not isinstance(partitions, list) or not all(
        isinstance(p, list) and all(isinstance(j, int) and not isinstance(j, bool) for j in p)
        for p in partitions
    ):
        raise ParseError(f"{where}: field 'partitions' must be a list of integer lists")
    fields = {name: _number_list(doc, name, n, where) for name in _PAYOFF_FIELDS}
    return GameInstance(
        lam=_field(doc, "lambda", float, where),
        m=_field(doc, "m", float, where),
        cap_C=_field(doc, "cap_C", int, where),
        min_NP=_field(doc, "min_NP", int, where),
        partitions=partitions,
        beta=_number_list(doc, "beta", len(partitions), where),
        **fields,
    )


def write_instance(inst: GameInstance, path) -> None:
    text = json.dumps(instance_to_dict(inst), indent=2)
    Path(path).write_text(text + "\n", encoding="utf-8")


def read_instance(path) -> GameInstance:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return instance_from_dict(doc, where=str(path))


def instance_summary(inst: GameInstance) -> str:
    return (
        f"n={inst.n_centers} L={inst.n_partitions} lam={inst.lam:g} m={inst.m:g} "
        f"N_P={inst.min_NP} C={inst.cap_C}"
    )


def as_index_tuple(subset: Sequence[int] | np.ndarray) -> tuple[int, ...]:
    return tuple(sorted(int(j) for j in subset))
