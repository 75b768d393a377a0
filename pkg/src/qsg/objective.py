"""Closed-form game math for a fixed defender strategy.

Notation follows the usual QR security-game conventions: ``N_j(x) =
exp(lam * (r^a_j - w^a_j x_j))`` is the unnormalised attack weight of center
j and ``D = sum_j N_j`` its normaliser. The Dinkelbach objective for a
threshold ``delta0`` is ``B = sum_j N_j (w^d_j x_j + l^d_j) - delta0 * D``.

The y-transform ``y_j = exp(-lam w^a_j x_j)`` turns the inner coverage problem
into a concave one; :func:`phi` and :func:`g_term` evaluate its Lagrangian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DegenerateTransformError, DomainError, EmptyStrategyError
from .model import GameInstance, _check_indices


@dataclass(frozen=True, eq=False)
class Strategy:
    """Operated subset plus the marginal coverage of each member.

    ``coverage[i]`` belongs to ``subset[i]``; the constructor sorts both by
    center index.
    """

    subset: tuple[int, ...]
    coverage: np.ndarray

    def __post_init__(self):
        subset = tuple(int(j) for j in self.subset)
        coverage = np.array(self.coverage, dtype=float).reshape(-1)
        if len(subset) != coverage.shape[0]:
            raise ValueError(f"{len(subset)} centers but {coverage.shape[0]} coverage values")
        if len(set(subset)) != len(subset):
            raise ValueError(f"duplicate centers in subset {subset}")
        order = np.argsort(subset, kind="stable")
        coverage = coverage[order]
        coverage.setflags(write=False)
        object.__setattr__(self, "subset", tuple(subset[i] for i in order))
        object.__setattr__(self, "coverage", coverage)

    @classmethod
    def from_mapping(cls, cover: Mapping[int, float]) -> "Strategy":
        keys = sorted(cover)
        return cls(tuple(keys), np.array([cover[k] for k in keys], dtype=float))

    @classmethod
    def from_dense(cls, subset: Iterable[int], x_dense: np.ndarray) -> "Strategy":
        subset = sorted(int(j) for j in subset)
        return cls(tuple(subset), np.asarray(x_dense, dtype=float)[subset])

    @property
    def index(self) -> np.ndarray:
        return np.asarray(self.subset, dtype=np.int64)

    def dense(self, n: int) -> np.ndarray:
        x = np.zeros(n)
        x[self.index] = self.coverage
        return x

    def __eq__(self, other):
        if not isinstance(other, Strategy):
            return NotImplemented
        return self.subset == other.subset and np.array_equal(self.coverage, other.coverage)

    __hash__ = None


@dataclass(frozen=True)
class QrDistribution:
    probs: np.ndarray
    log_denominator: float


def _members(inst: GameInstance, strategy: Strategy) -> np.ndarray:
    if not strategy.subset:
        raise EmptyStrategyError("strategy operates no centers")
    idx = np.asarray(_check_indices(inst, strategy.subset), dtype=np.int64)
    x = strategy.coverage
    if np.any(x < 0) or np.any(x > 1) or np.any(~np.isfinite(x)):
        raise DomainError("coverage values must lie in [0, 1]")
    return idx


def attack_logits(inst: GameInstance, idx: np.ndarray, x: np.ndarray) -> np.ndarray:
    """lam * (r^a_j - w^a_j x_j): the log attack weights."""
    return inst.lam * (inst.reward_att[idx] - inst.w_att[idx] * x)


def qr_probs(inst: GameInstance, strategy: Strategy) -> QrDistribution:
    idx = _members(inst, strategy)
    logits = attack_logits(inst, idx, strategy.coverage)
    top = logits.max()
    weights = np.exp(logits - top)
    total = weights.sum()
    return QrDistribution(probs=weights / total, log_denominator=float(top + math.log(total)))


def defender_utility(inst: GameInstance, strategy: Strategy) -> float:
    """Expected defender utility under the quantal response."""
    idx = _members(inst, strategy)
    q = qr_probs(inst, strategy).probs
    return float(q @ (inst.w_def[idx] * strategy.coverage + inst.loss_def[idx]))


def bopt_value(inst: GameInstance, strategy: Strategy, delta0: float) -> float:
    idx = _members(inst, strategy)
    x = strategy.coverage
    logits = attack_logits(inst, idx, x)
    top = logits.max()
    weights = np.exp(logits - top)
    inner = weights @ (inst.w_def[idx] * x + inst.loss_def[idx] - delta0)
    return float(math.exp(top) * inner)


def bopt_value_dense(inst: GameInstance, idx: np.ndarray, x: np.ndarray, delta0: float) -> float:
    """B for members ``idx`` with coverage ``x`` (no validation, hot path)."""
    n_x = np.exp(attack_logits(inst, idx, x))
    return float(n_x @ (inst.w_def[idx] * x + inst.loss_def[idx] - delta0))


def utility_dense(inst: GameInstance, idx: np.ndarray, x: np.ndarray) -> float:
    logits = attack_logits(inst, idx, x)
    w = np.exp(logits - logits.max())
    return float(w @ (inst.w_def[idx] * x + inst.loss_def[idx]) / w.sum())


# --------------------------------------------------------------------------
# y-transform and Lagrangian
# --------------------------------------------------------------------------


def _slope(inst: GameInstance, j: int) -> float:
    s = inst.lam * float(inst.w_att[j])
    if s == 0.0:
        raise DegenerateTransformError(
            f"lambda * w^a_{j} = 0: attack weight of center {j} does not depend on its coverage"
        )
    return s


def to_y(inst: GameInstance, j: int, x_j: float) -> float:
    return math.exp(-_slope(inst, j) * x_j)


def from_y(inst: GameInstance, j: int, y_j: float) -> float:
    return -math.log(y_j) / _slope(inst, j)


def y_box(inst: GameInstance, j: int) -> tuple[float, float]:
    return math.exp(-_slope(inst, j)), 1.0


def _check_duals(nu, mu):
    mu = np.asarray(mu, dtype=float)
    if nu < 0 or np.any(mu < 0):
        raise DomainError(f"dual multipliers must be nonnegative (nu={nu}, mu={mu.tolist()})")
    return mu


def g_term(inst: GameInstance, j: int, nu: float, mu_l: float, y_j: float, delta0: float) -> float:
    """Per-center Lagrangian term in y-space."""
    _check_duals(nu, [mu_l])
    s = _slope(inst, j)
    x = -math.log(y_j) / s
    n_y = y_j * math.exp(inst.lam * inst.reward_att[j])
    return n_y * (inst.w_def[j] * x + inst.loss_def[j] - delta0) - (nu + mu_l) * x


def g_term_x(inst: GameInstance, j: int, t: float, x_j: float, delta0: float) -> float:
    """The same term written in coverage space, with t = nu + mu_l.

    Defined for degenerate centers too.
    """
    n_x = math.exp(inst.lam * (inst.reward_att[j] - inst.w_att[j] * x_j))
    return n_x * (inst.w_def[j] * x_j + inst.loss_def[j] - delta0) - t * x_j


def phi(
    inst: GameInstance,
    subset: Sequence[int],
    nu: float,
    mu: Sequence[float],
    y: Sequence[float],
    delta0: float,
) -> float:
    """Lagrangian of the transformed BOPT for members ``subset`` at point ``y``."""
    mu = _check_duals(nu, mu)
    idx = np.asarray(_check_indices(inst, subset), dtype=np.int64)
    y = np.asarray(y, dtype=float)
    slope = inst.lam * inst.w_att[idx]
    if np.any(slope == 0):
        bad = int(idx[np.flatnonzero(slope == 0)[0]])
        raise DegenerateTransformError(f"lambda * w^a_{bad} = 0")
    x = -np.log(y) / slope
    n_y = y * np.exp(inst.lam * inst.reward_att[idx])
    value = n_y @ (inst.w_def[idx] * x + inst.loss_def[idx]) - delta0 * n_y.sum()
    value -= nu * (x.sum() - inst.m)
    part = inst.part_of[idx]
    for l in range(inst.n_partitions):
        value -= mu[l] * (x[part == l].sum() - inst.beta[l])
    return float(value)
