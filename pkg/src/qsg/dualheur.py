"""Dual heuristic for the inner BOPT problem.

For fixed multipliers (nu, mu) the transformed Lagrangian separates per
center: each center contributes its best term h_j, and the subset choice
becomes "best center of every partition, then the highest remaining scores
while they help or while the cardinality floor is unmet". The dual function
is convex in (nu, mu); it is minimised by projected gradient descent using
Danskin gradients.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, InvalidIndexError
from .model import GameInstance, _check_indices
from .numerics import closed_form_x
from .objective import Strategy

TIE_TOL = 1e-9


@dataclass(frozen=True)
class DualPoint:
    nu: float
    mu: np.ndarray

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float).reshape(-1)
        if self.nu < 0 or np.any(mu < 0) or not np.isfinite(self.nu) or not np.all(np.isfinite(mu)):
            raise DomainError(f"dual point must be finite and nonnegative (nu={self.nu}, mu={mu.tolist()})")
        mu.setflags(write=False)
        object.__setattr__(self, "nu", float(self.nu))
        object.__setattr__(self, "mu", mu)

    @classmethod
    def zero(cls, n_partitions: int) -> "DualPoint":
        return cls(0.0, np.zeros(n_partitions))

    @classmethod
    def from_vector(cls, v) -> "DualPoint":
        v = np.maximum(np.asarray(v, dtype=float), 0.0)
        return cls(float(v[0]), v[1:])

    def vector(self) -> np.ndarray:
        return np.concatenate(([self.nu], self.mu))


@dataclass
class FixedDualsOutcome:
    subset: tuple
    y_star: np.ndarray  # over subset members, sorted by index
    x_star: np.ndarray
    h_scores: np.ndarray  # every candidate center (nan outside the candidate set)
    value: float
    tie_detected: bool = False


@dataclass
class PgdParams:
    step_rule: str = "spg"  # "spg" (spectral, scaled) or "sqrt" (eta0 / sqrt(t))
    eta0: float = 1.0
    max_iters: int = 5000
    grad_tol: float = 1e-9
    patience: int = 60
    memory: int = 10
    tie_tol: float = TIE_TOL

    def __post_init__(self):
        if self.step_rule not in ("spg", "sqrt"):
            raise DomainError(f"unknown step rule {self.step_rule!r}")
        if self.max_iters < 1 or self.eta0 <= 0:
            raise DomainError("max_iters and eta0 must be positive")


@dataclass
class PgdResult:
    outcome: FixedDualsOutcome
    dual: DualPoint
    iterations: int
    converged: bool
    evaluations: int = 0
    stop_reason: str = ""
    kink: bool = False  # subset changed between nearby dual points at the end
    history: list = field(default_factory=list)  # best-so-far values

    def __iter__(self):
        # allows ``outcome, dual, iterations, converged = pgd_solve(...)``
        return iter((self.outcome, self.dual, self.iterations, self.converged))


class _Problem:
    """Per-center data for a candidate set, ready for vectorised evaluation."""

    def __init__(self, inst: GameInstance, members: np.ndarray, delta0: float, select: bool):
        self.inst = inst
        self.members = members
        self.delta0 = float(delta0)
        self.select = select
        self.wd = inst.w_def[members]
        self.ld = inst.loss_def[members]
        self.ra = inst.reward_att[members]
        self.wa = inst.w_att[members]
        self.part = inst.part_of[members]
        self.slope = inst.lam * self.wa
        self.n_weight = np.exp(inst.lam * self.ra)
        self.evaluations = 0

    def scores(self, dual_vec: np.ndarray):
        t = dual_vec[0] + dual_vec[1:][self.part]
        x, _ = closed_form_x(self.wd, self.ld, self.ra, self.wa, self.inst.lam, t, self.delta0)
        n_x = self.n_weight * np.exp(-self.slope * x)
        h = n_x * (self.wd * x + self.ld - self.delta0) - t * x
        return h, x

    def evaluate(self, dual_vec: np.ndarray, tie_tol: float = TIE_TOL):
        """Dual value, Danskin gradient and the maximising outcome."""
        self.evaluations += 1
        inst = self.inst
        h, x = self.scores(dual_vec)
        if self.select:
            chosen, tie = _select(inst, self.members, self.part, h, tie_tol)
        else:
            chosen, tie = np.arange(self.members.size), False
        base = dual_vec[0] * inst.m + dual_vec[1:] @ inst.beta
        value = float(h[chosen].sum() + base)
        xs = x[chosen]
        grad = np.empty_like(dual_vec)
        grad[0] = inst.m - xs.sum()
        grad[1:] = inst.beta - np.bincount(self.part[chosen], weights=xs, minlength=inst.n_partitions)
        idx = self.members[chosen]
        order = np.argsort(idx, kind="stable")
        h_full = np.full(inst.n_centers, np.nan)
        h_full[self.members] = h
        outcome = FixedDualsOutcome(
            subset=tuple(int(j) for j in idx[order]),
            y_star=np.exp(-self.slope[chosen][order] * xs[order]),
            x_star=xs[order],
            h_scores=h_full,
            value=value,
            tie_detected=tie,
        )
        return value, grad, outcome


def _select(inst: GameInstance, members, part, h, tie_tol):
    """Greedy subset choice on scores ``h`` (positions into ``members``)."""
    n_parts = inst.n_partitions
    # descending by score, lowest center index first on equal scores
    order = np.lexsort((members, -h))
    part_sorted = part[order]
    # the first occurrence of every partition in sorted order is its best center
    _, pos = np.unique(part_sorted, return_index=True)
    is_head = np.zeros(order.size, dtype=bool)
    is_head[pos] = True
    rest = order[~is_head]
    n_free = inst.cap_C - n_parts
    n_floor = inst.min_NP - n_parts
    n_pos = int(np.count_nonzero(h[rest] > 0))
    n_add = min(n_free, max(n_floor, n_pos), rest.size)
    chosen = np.concatenate((order[is_head], rest[:n_add]))

    scale = max(1.0, float(np.max(np.abs(h))))
    tol = tie_tol * scale
    tie = False
    # tie inside a partition between its best and runner-up, when the runner-up is not picked anyway
    in_rest = np.zeros(order.size, dtype=bool)
    in_rest[rest[:n_add]] = True
    for l in range(n_parts):
        sel = order[part_sorted == l]
        if sel.size > 1 and not in_rest[sel[1]] and abs(h[sel[0]] - h[sel[1]]) <= tol:
            tie = True
            break
    if not tie and n_add < rest.size:
        # tie at the greedy cutoff, or a marginal score at the sign threshold
        cut = h[rest[n_add]]
        if n_add > 0 and abs(h[rest[n_add - 1]] - cut) <= tol:
            tie = True
        elif n_add >= max(n_floor, 0) and n_add < n_free and abs(cut) <= tol:
            tie = True
    if not tie and n_add > max(n_floor, 0) and abs(h[rest[n_add - 1]]) <= tol:
        tie = True
    return chosen, tie


def h_score(inst: GameInstance, j: int, dual: DualPoint, delta0: float) -> float:
    if not 0 <= j < inst.n_centers:
        raise InvalidIndexError(f"center index {j} out of range 0..{inst.n_centers - 1}")
    prob = _Problem(inst, np.array([j]), delta0, select=False)
    h, _ = prob.scores(dual.vector())
    return float(h[0])


def fixed_duals_solve(inst: GameInstance, dual: DualPoint, delta0: float, tie_tol: float = TIE_TOL) -> FixedDualsOutcome:
    _check_dual(inst, dual)
    prob = _Problem(inst, np.arange(inst.n_centers), delta0, select=True)
    return prob.evaluate(dual.vector(), tie_tol)[2]


def danskin_gradient(inst: GameInstance, outcome: FixedDualsOutcome, delta0: float = 0.0):
    """(d_nu, d_mu) of the dual function at the point that produced ``outcome``.

    Only the maximiser enters the formula, so ``delta0`` is accepted for
    call-site symmetry and otherwise unused.
    """
    idx = np.asarray(outcome.subset, dtype=np.int64)
    x = np.asarray(outcome.x_star, dtype=float)
    d_nu = inst.m - float(x.sum())
    d_mu = inst.beta - np.bincount(inst.part_of[idx], weights=x, minlength=inst.n_partitions)
    return d_nu, d_mu


def dual_value(inst: GameInstance, dual: DualPoint, delta0: float, subset: Sequence[int] | None = None) -> float:
    """Dual function value; with ``subset`` the subset is held fixed."""
    _check_dual(inst, dual)
    if subset is None:
        prob = _Problem(inst, np.arange(inst.n_centers), delta0, select=True)
    else:
        prob = _Problem(inst, np.asarray(sorted(_check_indices(inst, subset)), dtype=np.int64), delta0, select=False)
    return prob.evaluate(dual.vector())[0]


def _check_dual(inst: GameInstance, dual: DualPoint):
    if dual.mu.shape[0] != inst.n_partitions:
        raise DomainError(f"dual has {dual.mu.shape[0]} partition multipliers, instance has {inst.n_partitions}")


def _initial_step(prob: _Problem) -> float:
    # duals live on the scale of N_j * w^d_j while gradients are coverage sums
    scale = float(np.max(prob.n_weight * np.maximum(prob.wd, 1e-12)))
    return max(scale, 1.0)


def _descend(prob: _Problem, xi: float, params: PgdParams, start=None) -> PgdResult:
    if xi <= 0:
        raise DomainError("xi must be positive")
    dim = prob.inst.n_partitions + 1
    d = np.zeros(dim) if start is None else np.maximum(np.asarray(start, dtype=float), 0.0)
    f, g, out = prob.evaluate(d, params.tie_tol)
    best_f, best_d, best_out = f, d.copy(), out
    history = [best_f]
    recent = deque([f], maxlen=params.memory)
    alpha = _initial_step(prob) if params.step_rule == "spg" else params.eta0
    alpha_min, alpha_max = 1e-12 * alpha, 1e12 * alpha
    since_best = 0
    stalls = 0
    recent_subsets = deque([out.subset], maxlen=params.patience)
    stop_reason, converged = "max_iters", False
    it = 0
    for it in range(1, params.max_iters + 1):
        if params.step_rule == "sqrt":
            trial = np.maximum(d - params.eta0 / math.sqrt(it) * g, 0.0)
            ft, gt, ot = prob.evaluate(trial, params.tie_tol)
        else:
            direction = np.maximum(d - alpha * g, 0.0) - d
            if np.max(np.abs(direction)) == 0.0:
                stop_reason, converged = "stationary", True
                break
            gtd = float(g @ direction)
            ref = max(recent)
            step = 1.0
            while True:
                trial = d + step * direction
                ft, gt, ot = prob.evaluate(trial, params.tie_tol)
                if ft <= ref + 1e-4 * step * gtd or step < 1e-10:
                    break
                step *= 0.5
            if step < 1e-10 and ft > ref:
                stalls += 1
                alpha = max(alpha * 1e-3, alpha_min)
                if stalls >= 3:
                    stop_reason, converged = "line_search_stall", True
                    break
                continue
            s_vec = trial - d
            y_vec = gt - g
            sy = float(s_vec @ y_vec)
            alpha = float(np.clip(s_vec @ s_vec / sy, alpha_min, alpha_max)) if sy > 0 else alpha_max
        change = abs(ft - f)
        d, f, g = trial, ft, gt
        recent.append(f)
        recent_subsets.append(ot.subset)
        if f < best_f - xi:
            since_best = 0
        else:
            since_best += 1
        if f < best_f:
            best_f, best_d, best_out = f, d.copy(), ot
        history.append(best_f)
        proj_grad = np.max(np.abs(np.maximum(d - g, 0.0) - d))
        if change < xi and proj_grad <= params.grad_tol:
            stop_reason, converged = "value_and_gradient", True
            break
        if since_best >= params.patience:
            stop_reason, converged = "no_progress", True
            break
    # a nonsmooth stop while the maximiser keeps switching means the minimum sits on a kink
    switching = stop_reason not in ("value_and_gradient", "stationary") and len(set(recent_subsets)) > 1
    kink = best_out.tie_detected or (prob.select and (switching or _probe_kink(prob, best_d, best_out.subset)))
    return PgdResult(
        outcome=best_out,
        dual=DualPoint.from_vector(best_d),
        iterations=it,
        converged=converged,
        evaluations=prob.evaluations,
        stop_reason=stop_reason,
        kink=kink,
        history=history,
    )


def _probe_kink(prob: _Problem, d: np.ndarray, subset, rel: float = 1e-6) -> bool:
    """True if the maximising subset changes within a small box around ``d``."""
    scale = max(float(np.max(d)), 1.0)
    for i in range(d.size):
        for sign in (1.0, -1.0):
            probe = d.copy()
            probe[i] = max(probe[i] + sign * rel * scale, 0.0)
            if prob.evaluate(probe)[2].subset != subset:
                return True
    return False


def pgd_solve(inst: GameInstance, delta0: float, xi: float = 1e-6, params: PgdParams | None = None, start=None) -> PgdResult:
    """Minimise the switched dual over (nu, mu) >= 0, starting from zero."""
    params = params or PgdParams()
    prob = _Problem(inst, np.arange(inst.n_centers), delta0, select=True)
    return _descend(prob, xi, params, start)


def repair_coverage(inst: GameInstance, subset: Sequence[int], x: np.ndarray) -> np.ndarray:
    """Scale coverage down until the budget and partition caps hold."""
    idx = np.asarray(subset, dtype=np.int64)
    x = np.clip(np.asarray(x, dtype=float).copy(), 0.0, 1.0)
    part = inst.part_of[idx]
    for l in range(inst.n_partitions):
        mask = part == l
        total = x[mask].sum()
        if total > inst.beta[l]:
            x[mask] *= inst.beta[l] / total
    total = x.sum()
    if total > inst.m:
        x *= inst.m / total
    return x


def primal_strategy(inst: GameInstance, outcome: FixedDualsOutcome) -> Strategy:
    x = repair_coverage(inst, outcome.subset, outcome.x_star)
    return Strategy(outcome.subset, x)


def pgd_solve_fixed_subset(inst: GameInstance, subset: Sequence[int], delta0: float, xi: float = 1e-6, params: PgdParams | None = None):
    """Solve max_x B(S, x, delta0) for a fixed S through its dual.

    Returns ``(strategy, value, dual)`` where ``value`` is B at the repaired
    primal strategy.
    """
    from .objective import bopt_value_dense

    params = params or PgdParams()
    members = np.asarray(sorted(_check_indices(inst, subset)), dtype=np.int64)
    if members.size == 0:
        from .errors import EmptyStrategyError

        raise EmptyStrategyError("fixed subset is empty")
    prob = _Problem(inst, members, delta0, select=False)
    res = _descend(prob, xi, params)
    x = repair_coverage(inst, members, res.outcome.x_star)
    strategy = Strategy(tuple(int(j) for j in members), x)
    return strategy, bopt_value_dense(inst, members, x, delta0), res.dual
