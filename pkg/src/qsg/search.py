"""Bisection on the Dinkelbach threshold and the hybrid driver.

``binary_search`` brackets the optimal utility between ``min l^d`` and
``max r^d`` and asks an inner solver for the sign of ``max B(., delta0)``.
``hybrid_solve`` first runs the dual heuristic; only when the heuristic's own
bound gap exceeds epsilon does it re-run the bisection with an exact (small
n) or MILP inner solver inside the heuristic's bounds, then polishes the
coverage of the chosen subset.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .dualheur import DualPoint, PgdParams, pgd_solve, pgd_solve_fixed_subset, primal_strategy
from .errors import DomainError, QsgError
from .milp import (
    DEFAULT_PIECES,
    SMALL_EXACT_MAX_CENTERS,
    build_pwla,
    resolve_solver,
    solve_pwla,
    solve_small_exact,
)
from .model import GameInstance
from .objective import Strategy, defender_utility

DEFAULT_EPSILON = 1e-3
FEAS_TOL = 1e-6
METHODS = ("heuristic", "milp", "hybrid", "convexopt", "twosteps", "oracle")


@dataclass
class InnerResult:
    strategy: Strategy
    objective: float
    diagnostics: dict = field(default_factory=dict)


InnerSolver = Callable[[float], InnerResult]


@dataclass
class SolveReport:
    delta0_final: float
    strategy: Strategy
    utility: float
    bound_gap: float
    method: str
    bisect_iterations: int
    inner_diagnostics: dict
    wall_time: float
    lower: float = math.nan
    upper: float = math.nan
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "delta0_final": self.delta0_final,
            "utility": self.utility,
            "bound_gap": self.bound_gap,
            "subset": list(self.strategy.subset),
            "coverage": [float(v) for v in self.strategy.coverage],
            "bisect_iterations": self.bisect_iterations,
            "lower": self.lower,
            "upper": self.upper,
            "wall_time": self.wall_time,
            "warnings": list(self.warnings),
            "inner_diagnostics": _jsonable(self.inner_diagnostics),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def default_xi(epsilon: float) -> float:
    return min(1e-6, epsilon * 1e-2)


def initial_bounds(inst: GameInstance) -> tuple[float, float]:
    return float(np.max(inst.w_def + inst.loss_def)), float(np.min(inst.loss_def))


def strategy_violations(inst: GameInstance, strategy: Strategy, tol: float = FEAS_TOL, cardinality: bool = True) -> list:
    """Broken constraints of a strategy, empty when feasible."""
    out = []
    idx = strategy.index
    x = strategy.coverage
    if np.any(x < -tol) or np.any(x > 1 + tol):
        out.append("coverage outside [0, 1]")
    if x.sum() > inst.m + tol:
        out.append(f"budget: {x.sum()} > {inst.m}")
    part = inst.part_of[idx]
    for l in range(inst.n_partitions):
        total = x[part == l].sum()
        if total > inst.beta[l] + tol:
            out.append(f"partition {l}: {total} > beta {inst.beta[l]}")
    if cardinality:
        if not inst.min_NP <= len(idx) <= inst.cap_C:
            out.append(f"|S|={len(idx)} outside [{inst.min_NP}, {inst.cap_C}]")
        missing = set(range(inst.n_partitions)) - set(part.tolist())
        if missing:
            out.append(f"partitions without an operated center: {sorted(missing)}")
    return out


def binary_search(
    inst: GameInstance,
    inner: InnerSolver,
    epsilon: float = DEFAULT_EPSILON,
    lower: float | None = None,
    upper: float | None = None,
    method: str = "custom",
) -> SolveReport:
    """Bisection on delta0 driven by the sign of the inner objective.

    The reported strategy is the best-utility one among all inner solutions;
    ``delta0_final`` is the final lower end of the bracket.
    """
    if not epsilon > 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    start = time.perf_counter()
    u0, l0 = initial_bounds(inst)
    U = u0 if upper is None else float(upper)
    L = l0 if lower is None else float(lower)
    visited = []
    best, best_u = None, -math.inf
    iterations = 0

    def call(delta):
        nonlocal best, best_u
        try:
            res = inner(delta)
        except QsgError as exc:
            raise type(exc)(f"{exc} (bisection at delta0={delta!r}, bracket [{L!r}, {U!r}])") from exc
        u = defender_utility(inst, res.strategy)
        visited.append({"delta0": delta, "objective": res.objective, "utility": u, **res.diagnostics})
        if u > best_u:
            best, best_u = res.strategy, u
        return res

    while U - L >= epsilon:
        delta = 0.5 * (U + L)
        iterations += 1
        res = call(delta)
        if res.objective >= 0:
            L = delta
        else:
            U = delta
    if best is None:
        call(L)
    ties = sum(1 for v in visited if v.get("tie"))
    report = SolveReport(
        delta0_final=L,
        strategy=best,
        utility=best_u,
        bound_gap=abs(L - best_u),
        method=method,
        bisect_iterations=iterations,
        inner_diagnostics={"visited": visited, "tie_count": ties},
        wall_time=time.perf_counter() - start,
        lower=L,
        upper=U,
    )
    return report


# --------------------------------------------------------------------------
# inner solvers
# --------------------------------------------------------------------------


def heuristic_inner(inst: GameInstance, xi: float, params: PgdParams | None = None) -> InnerSolver:
    params = params or PgdParams()

    def inner(delta0: float) -> InnerResult:
        res = pgd_solve(inst, delta0, xi, params)
        strategy = primal_strategy(inst, res.outcome)
        return InnerResult(
            strategy,
            res.outcome.value,
            {
                "pgd_iterations": res.iterations,
                "converged": res.converged,
                "stop_reason": res.stop_reason,
                "tie": bool(res.kink),
                "dual": res.dual.vector().tolist(),
            },
        )

    return inner


def exact_inner(inst: GameInstance, xi: float, params: PgdParams | None = None) -> InnerSolver:
    """Exact BOPT by subset enumeration, pruned with the heuristic's dual bound."""

    def inner(delta0: float) -> InnerResult:
        bound = pgd_solve(inst, delta0, xi, params)
        strategy, value = solve_small_exact(inst, delta0, xi=min(xi, 1e-9), bound_dual=bound.dual)
        return InnerResult(strategy, value, {"tie": bool(bound.kink), "dual_value": bound.outcome.value})

    return inner


def milp_inner(inst: GameInstance, pieces: int, solver_command: str | None, timeout: float = 600.0) -> InnerSolver:
    def inner(delta0: float) -> InnerResult:
        model = build_pwla(inst, delta0, pieces)
        sol = solve_pwla(model, solver_command, timeout)
        return InnerResult(sol.strategy, sol.objective, {"solve_time": sol.solve_time, "status": sol.status})

    return inner


def fixed_subset_inner(inst: GameInstance, subset: Sequence[int], xi: float, params: PgdParams | None = None) -> InnerSolver:
    def inner(delta0: float) -> InnerResult:
        strategy, value, dual = pgd_solve_fixed_subset(inst, subset, delta0, xi, params)
        return InnerResult(strategy, value, {"dual": dual.vector().tolist()})

    return inner


def polish_subset(inst: GameInstance, strategy: Strategy, xi: float, max_rounds: int = 30) -> Strategy:
    """Re-optimise coverage on a fixed subset with Dinkelbach steps."""
    best, best_u = strategy, defender_utility(inst, strategy)
    delta = best_u
    for _ in range(max_rounds):
        cand, value, _ = pgd_solve_fixed_subset(inst, strategy.subset, delta, xi)
        u = defender_utility(inst, cand)
        if u <= best_u + 1e-13 * max(1.0, abs(best_u)):
            break
        best, best_u, delta = cand, u, u
    return best


# --------------------------------------------------------------------------
# drivers
# --------------------------------------------------------------------------


def heuristic_solve(inst: GameInstance, epsilon: float = DEFAULT_EPSILON, xi: float | None = None, params: PgdParams | None = None) -> SolveReport:
    xi = default_xi(epsilon) if xi is None else xi
    return binary_search(inst, heuristic_inner(inst, xi, params), epsilon, method="heuristic")


def milp_solve(
    inst: GameInstance,
    epsilon: float = DEFAULT_EPSILON,
    pieces: int = DEFAULT_PIECES,
    solver_command: str | None = None,
    timeout: float = 600.0,
) -> SolveReport:
    return binary_search(inst, milp_inner(inst, pieces, solver_command, timeout), epsilon, method="milp")


def exact_solve(inst: GameInstance, epsilon: float = DEFAULT_EPSILON, xi: float | None = None) -> SolveReport:
    xi = default_xi(epsilon) if xi is None else xi
    return binary_search(inst, exact_inner(inst, xi), epsilon, method="exact")


def hybrid_solve(
    inst: GameInstance,
    epsilon: float = DEFAULT_EPSILON,
    xi: float | None = None,
    pieces: int = DEFAULT_PIECES,
    solver_command: str | None = None,
    params: PgdParams | None = None,
    timeout: float = 600.0,
) -> SolveReport:
    start = time.perf_counter()
    xi = default_xi(epsilon) if xi is None else xi
    if xi > epsilon * 1e-2:
        raise DomainError(f"xi={xi} must not exceed epsilon * 1e-2 = {epsilon * 1e-2}")
    heur = heuristic_solve(inst, epsilon, xi, params)
    diag = {
        "heuristic_utility": heur.utility,
        "heuristic_delta0": heur.delta0_final,
        "heuristic_gap": heur.bound_gap,
        "tie_count": heur.inner_diagnostics["tie_count"],
        "heuristic_visited": heur.inner_diagnostics["visited"],
        "milp_invoked": False,
        "exit": "heuristic",
    }

    def finish(report_from, strategy, delta0, iterations, warnings=()):
        u = defender_utility(inst, strategy)
        return SolveReport(
            delta0_final=delta0,
            strategy=strategy,
            utility=u,
            bound_gap=abs(delta0 - u),
            method="hybrid",
            bisect_iterations=iterations,
            inner_diagnostics=diag,
            wall_time=time.perf_counter() - start,
            lower=report_from.lower,
            upper=report_from.upper,
            warnings=list(warnings),
        )

    if heur.bound_gap <= epsilon:
        return finish(heur, heur.strategy, heur.delta0_final, heur.bisect_iterations)

    command = resolve_solver(solver_command)
    if inst.n_centers <= SMALL_EXACT_MAX_CENTERS:
        inner, leg = exact_inner(inst, xi, params), "exact"
    elif command is not None:
        inner, leg = milp_inner(inst, pieces, command, timeout), "milp"
    else:
        diag["exit"] = "heuristic_unverified"
        warning = (
            f"heuristic bound gap {heur.bound_gap:.3g} exceeds epsilon={epsilon} and no MILP solver is "
            "configured for n > 16; returning the heuristic answer"
        )
        return finish(heur, heur.strategy, heur.delta0_final, heur.bisect_iterations, [warning])

    diag["milp_invoked"] = True
    diag["exit"] = leg
    second = binary_search(inst, inner, epsilon, lower=heur.utility, upper=heur.delta0_final + 2 * epsilon, method=leg)
    diag["milp_visited"] = second.inner_diagnostics["visited"]
    polished = polish_subset(inst, second.strategy, xi)
    candidates = [heur.strategy, second.strategy, polished]
    best = max(candidates, key=lambda s: defender_utility(inst, s))
    diag["polish_gain"] = defender_utility(inst, polished) - second.utility
    return finish(second, best, second.delta0_final, heur.bisect_iterations + second.bisect_iterations)
