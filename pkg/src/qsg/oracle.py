"""Independent ground truth for small instances.

Two routes to the global optimum of the defender utility:

* ``grid``: every feasible subset, every coverage vector on the lattice
  ``{0, 1/r, ..., 1}^S`` that respects the budget and partition caps. Grid
  points are feasible, so the value is a certified lower bound on the optimum
  and sits within ``sum(w^d) / r`` of it.
* ``dual_inner``: every feasible subset, with coverage optimised exactly. For a
  fixed subset and threshold the inner problem is solved from its KKT system
  by water-filling on the per-partition and global multipliers; Dinkelbach
  iterations then give the best utility of that subset.

Neither route uses the gradient descent code, which is what they check.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import lambertw

from .errors import DomainError, InfeasibleError, SizeError
from .model import GameInstance, _check_indices
from .numerics import closed_form_x, lambert_w0_of_exp
from .objective import Strategy, bopt_value_dense, defender_utility, utility_dense

GRID_MAX_CENTERS = 8
DUAL_INNER_MAX_CENTERS = 16
GRID_MAX_POINTS = 30_000_000


@dataclass(frozen=True)
class OracleResult:
    best_strategy: Strategy
    best_utility: float
    subsets_evaluated: int
    method: str
    error_bound: float


def default_resolution(n: int) -> int:
    return 50 if n <= 5 else 20


def feasible_subsets(inst: GameInstance):
    """All operated sets allowed by the cardinality window and partition cover."""
    n, parts = inst.n_centers, inst.part_of
    for size in range(inst.min_NP, inst.cap_C + 1):
        for subset in itertools.combinations(range(n), size):
            if len(set(parts[list(subset)].tolist())) == inst.n_partitions:
                yield subset


# --------------------------------------------------------------------------
# exact fixed-subset inner problem
# --------------------------------------------------------------------------


def _x_star(wd: float, ld: float, ra: float, wa: float, lam: float, t: float, delta0: float) -> float:
    """Scalar maximiser of N(x)(w^d x + l^d - delta0) - t x on [0, 1].

    Written separately from the vectorised kernel (and on scipy's Lambert W)
    so the oracle does not share code with the code it checks.
    """
    s = lam * wa
    if s == 0.0:
        return 1.0 if math.exp(lam * ra) * wd > t else 0.0
    if wd == 0.0:
        gap = delta0 - ld
        if gap <= 0.0:
            return 0.0
        if t == 0.0:
            return 1.0
        return min(max((lam * ra - math.log(t / (s * gap))) / s, 0.0), 1.0)
    a = s * (ld - delta0) / wd
    w = 0.0
    if t > 0.0:
        log_arg = math.log(t) - math.log(wd) + 1.0 - lam * ra - a
        if log_arg < 700.0:
            w = float(lambertw(math.exp(log_arg)).real)
        else:
            w = float(lambert_w0_of_exp(np.array([log_arg]))[0])
    return min(max((1.0 - a - w) / s, 0.0), 1.0)


class _Kkt:
    """max_x B(S, x, delta0) subject to the budget and the partition caps."""

    def __init__(self, inst: GameInstance, members: np.ndarray, delta0: float):
        self.inst = inst
        self.members = members
        self.delta0 = delta0
        self.wd = inst.w_def[members]
        self.ld = inst.loss_def[members]
        self.ra = inst.reward_att[members]
        self.wa = inst.w_att[members]
        self.part = inst.part_of[members]
        self.rows = list(zip(self.wd.tolist(), self.ld.tolist(), self.ra.tolist(), self.wa.tolist()))
        s = inst.lam * self.wa
        n0 = np.exp(inst.lam * self.ra)
        # beyond this multiplier every member sits at zero coverage
        self.t_hi = float(np.max(n0 * (self.wd + s * np.abs(self.ld - delta0)))) * 1.01 + 1.0

    def x_of(self, t, mask=None):
        lam, d0 = self.inst.lam, self.delta0
        rows = self.rows if mask is None else [r for r, keep in zip(self.rows, mask) if keep]
        return np.array([_x_star(*r, lam, t, d0) for r in rows])

    def _fill(self, alloc, cap: float):
        """Smallest multiplier whose allocation meets ``cap``, with jump interpolation."""
        x0 = alloc(0.0)
        if x0.sum() <= cap:
            return 0.0, x0
        root = brentq(lambda t: alloc(t).sum() - cap, 0.0, self.t_hi, xtol=1e-13, rtol=1e-15, maxiter=500)
        eta = 1e-10 * max(1.0, root)
        xl, xr = alloc(max(root - eta, 0.0)), alloc(root + eta)
        sl, sr = xl.sum(), xr.sum()
        theta = (cap - sr) / (sl - sr) if sl > sr else 0.0
        return root, xr + min(max(theta, 0.0), 1.0) * (xl - xr)

    def solve(self) -> np.ndarray:
        inst = self.inst
        masks = [self.part == l for l in range(inst.n_partitions)]
        thresholds, capped = [], []
        for l, mask in enumerate(masks):
            if not mask.any():
                thresholds.append(0.0)
                capped.append(np.zeros(0))
                continue
            t_l, x_l = self._fill(lambda t, mask=mask: self.x_of(t, mask), float(inst.beta[l]))
            thresholds.append(t_l)
            capped.append(x_l)

        def alloc(nu):
            x = np.empty(self.wd.shape)
            for l, mask in enumerate(masks):
                if mask.any():
                    x[mask] = capped[l] if nu <= thresholds[l] else self.x_of(nu, mask)
            return x

        _, x = self._fill(alloc, float(inst.m))
        x = np.clip(x, 0.0, 1.0)
        # guard against round-off beyond the caps
        for l, mask in enumerate(masks):
            total = x[mask].sum()
            if total > inst.beta[l]:
                x[mask] *= inst.beta[l] / total
        if x.sum() > inst.m:
            x *= inst.m / x.sum()
        return x


def kkt_fixed_subset(inst: GameInstance, subset: Sequence[int], delta0: float):
    """Exact ``(x, B)`` for ``max_x B(S, x, delta0)`` on a fixed subset."""
    members = np.asarray(sorted(_check_indices(inst, subset)), dtype=np.int64)
    x = _Kkt(inst, members, delta0).solve()
    return x, bopt_value_dense(inst, members, x, delta0)


def maximize_fixed_subset(inst: GameInstance, subset: Sequence[int], tol: float = 1e-13, max_iters: int = 100):
    """Best utility of a fixed subset via Dinkelbach iterations on the threshold."""
    members = np.asarray(sorted(_check_indices(inst, subset)), dtype=np.int64)
    x = np.zeros(members.size)
    delta = utility_dense(inst, members, x)
    for _ in range(max_iters):
        x_new = _Kkt(inst, members, delta).solve()
        value = utility_dense(inst, members, x_new)
        if value <= delta + tol * max(1.0, abs(delta)):
            if value > delta:
                x, delta = x_new, value
            break
        x, delta = x_new, value
    return x, delta


def _utility_cap(inst: GameInstance, subset) -> float:
    # utility is a convex combination of per-center payoffs
    idx = list(subset)
    cap = np.minimum(np.minimum(1.0, inst.m), inst.beta[inst.part_of[idx]])
    return float(np.max(inst.w_def[idx] * cap + inst.loss_def[idx]))


def _relaxed_terms(inst: GameInstance, delta0: float) -> np.ndarray:
    """Per-center max of N(x)(w^d x + l^d - delta0) with the coupling rows dropped.

    Summing these over S bounds max_x B(S, x, delta0) from above.
    """
    cap = np.minimum(np.minimum(1.0, inst.m), inst.beta[inst.part_of])
    x, _ = closed_form_x(inst.w_def, inst.loss_def, inst.reward_att, inst.w_att, inst.lam, 0.0, delta0)
    x = np.minimum(x, cap)
    n_x = np.exp(inst.lam * (inst.reward_att - inst.w_att * x))
    return n_x * (inst.w_def * x + inst.loss_def - delta0)


def _dual_inner(inst: GameInstance):
    subsets = sorted(feasible_subsets(inst), key=lambda s: -_utility_cap(inst, s))
    best, best_u, evaluated = None, -math.inf, 0
    terms = None
    for subset in subsets:
        if _utility_cap(inst, subset) <= best_u:
            break
        # S can only beat the incumbent if B(S, ., best_u) > 0 somewhere
        if terms is not None and terms[list(subset)].sum() <= 0.0:
            continue
        evaluated += 1
        x, u = maximize_fixed_subset(inst, subset)
        if u > best_u:
            best, best_u = Strategy(subset, x), u
            terms = _relaxed_terms(inst, best_u)
    return best, evaluated


# --------------------------------------------------------------------------
# grid route
# --------------------------------------------------------------------------


def _bounded_compositions(parts: int, total: int, upper: int) -> np.ndarray:
    """Integer vectors of length ``parts`` with entries in [0, upper] and sum <= total."""
    total = min(total, parts * upper)
    if parts == 0:
        return np.zeros((1, 0), dtype=np.int64)
    combos = np.array(list(itertools.combinations(range(total + parts), parts)), dtype=np.int64)
    prev = np.concatenate((np.full((combos.shape[0], 1), -1), combos[:, :-1]), axis=1)
    k = combos - prev - 1
    return k[np.all(k <= upper, axis=1)]


def _grid_count(parts: int, total: int) -> int:
    return math.comb(total + parts, parts)


def _grid(inst: GameInstance, resolution: int):
    r = resolution
    budget = int(math.floor(inst.m * r + 1e-9))
    caps = np.floor(inst.beta * r + 1e-9).astype(np.int64)
    subsets = list(feasible_subsets(inst))
    points = sum(_grid_count(len(s), min(budget, len(s) * r)) for s in subsets)
    if points > GRID_MAX_POINTS:
        raise SizeError(f"grid oracle would evaluate {points} points (limit {GRID_MAX_POINTS}); lower the resolution")
    cache = {}
    best, best_u = None, -math.inf
    for subset in subsets:
        p = len(subset)
        if p not in cache:
            cache[p] = _bounded_compositions(p, budget, r)
        k = cache[p]
        idx = np.asarray(subset)
        part = inst.part_of[idx]
        ok = np.ones(k.shape[0], dtype=bool)
        for l in range(inst.n_partitions):
            ok &= k[:, part == l].sum(axis=1) <= caps[l]
        x = k[ok] / r
        logits = inst.lam * (inst.reward_att[idx] - inst.w_att[idx] * x)
        w = np.exp(logits - logits.max(axis=1, keepdims=True))
        util = (w * (inst.w_def[idx] * x + inst.loss_def[idx])).sum(axis=1) / w.sum(axis=1)
        i = int(np.argmax(util))
        if util[i] > best_u:
            best, best_u = Strategy(subset, x[i]), float(util[i])
    return best, len(subsets)


def brute_force_eqopt(inst: GameInstance, resolution: int | None = None, method: str = "grid") -> OracleResult:
    n = inst.n_centers
    if method == "grid":
        if n > GRID_MAX_CENTERS:
            raise SizeError(f"grid oracle supports n <= {GRID_MAX_CENTERS}, got n={n}")
        r = resolution or default_resolution(n)
        if r < 1:
            raise DomainError("resolution must be >= 1")
        best, evaluated = _grid(inst, r)
        error = float(inst.w_def.sum()) / r
    elif method == "dual_inner":
        if n > DUAL_INNER_MAX_CENTERS:
            raise SizeError(f"dual_inner oracle supports n <= {DUAL_INNER_MAX_CENTERS}, got n={n}")
        best, evaluated = _dual_inner(inst)
        error = 1e-9
    else:
        raise DomainError(f"unknown oracle method {method!r}")
    if best is None:
        raise InfeasibleError("instance has no feasible subset")
    return OracleResult(
        best_strategy=best,
        best_utility=defender_utility(inst, best),
        subsets_evaluated=evaluated,
        method=method,
        error_bound=error,
    )


# --------------------------------------------------------------------------
# dual-side checks
# --------------------------------------------------------------------------


def primal_bopt_max(inst: GameInstance, delta0: float, subset: Sequence[int] | None = None):
    """Exact ``max B(S, x, delta0)`` over feasible subsets (or one fixed subset)."""
    if subset is not None:
        x, value = kkt_fixed_subset(inst, subset, delta0)
        return Strategy(tuple(sorted(subset)), x), value
    if inst.n_centers > DUAL_INNER_MAX_CENTERS:
        raise SizeError(f"primal enumeration supports n <= {DUAL_INNER_MAX_CENTERS}")
    best, best_v = None, -math.inf
    for s in feasible_subsets(inst):
        x, v = kkt_fixed_subset(inst, s, delta0)
        if v > best_v:
            best, best_v = Strategy(s, x), v
    return best, best_v


def dual_grid_min(
    inst: GameInstance,
    subset: Sequence[int] | None,
    delta0: float,
    nu_range: tuple[float, float],
    mu_range: tuple[float, float],
    steps: int,
) -> float:
    """Minimum of the dual function over a box grid of (nu, mu_1..mu_L).

    With ``subset=None`` the subset is re-selected at every point (the switched
    dual); otherwise it is held fixed.
    """
    from .dualheur import _Problem

    if steps < 2:
        raise DomainError("steps must be >= 2")
    if min(nu_range) < 0 or min(mu_range) < 0:
        raise DomainError("dual ranges must be nonnegative")
    if subset is None:
        prob = _Problem(inst, np.arange(inst.n_centers), delta0, select=True)
    else:
        prob = _Problem(inst, np.asarray(sorted(_check_indices(inst, subset)), dtype=np.int64), delta0, select=False)
    nus = np.linspace(nu_range[0], nu_range[1], steps)
    mus = np.linspace(mu_range[0], mu_range[1], steps)
    best = math.inf
    for nu in nus:
        for mu in itertools.product(mus, repeat=inst.n_partitions):
            best = min(best, prob.evaluate(np.concatenate(([nu], mu)))[0])
    return best
