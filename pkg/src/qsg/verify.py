"""Self-check suites behind ``qsg verify``.

Each suite returns a :class:`SuiteResult`; callers may inject the function
under test (used by the mutation fixture for the gradient suite).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dualheur import DualPoint, _Problem, danskin_gradient, fixed_duals_solve, pgd_solve
from .model import generate_instance
from .numerics import closed_form_y, finite_diff_grad, lambert_w0, maximize_unimodal
from .objective import g_term_x
from .oracle import brute_force_eqopt, primal_bopt_max

LEVELS = {
    "fast": {"closed_form_sites": 1000, "gradient_points": 150, "weak_instances": 3, "oracle_instances": 4},
    "full": {"closed_form_sites": 10000, "gradient_points": 1000, "weak_instances": 12, "oracle_instances": 20},
}


@dataclass
class SuiteResult:
    name: str
    passed: bool
    checked: int
    worst: float
    tolerance: float
    seconds: float = 0.0
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<20} checked={self.checked:<6} worst={self.worst:.3e} tol={self.tolerance:.1e}  {self.detail}"


def lambert_suite(w_fn: Callable = lambert_w0) -> SuiteResult:
    zs = np.concatenate(([0.0], np.logspace(-12, 10, 4001), [math.e, 1.0]))
    w = np.asarray(w_fn(zs), dtype=float)
    resid = np.abs(w * np.exp(w) - zs) / np.maximum(1.0, zs)
    worst = float(np.max(resid))
    return SuiteResult("lambert_w", worst <= 1e-10, zs.size, worst, 1e-10)


def closed_form_suite(sites: int, seed: int = 11, solver: Callable = closed_form_y) -> SuiteResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    insts = [generate_instance(s, 20) for s in range(5)]
    for _ in range(sites):
        inst = insts[rng.integers(len(insts))]
        j = int(rng.integers(inst.n_centers))
        scale = float(np.exp(inst.lam * inst.reward_att[j]) * inst.w_def[j])
        nu = float(rng.uniform(0, 2 * scale)) if rng.random() < 0.8 else 0.0
        mu = float(rng.uniform(0, scale)) if rng.random() < 0.5 else 0.0
        d0 = float(rng.uniform(inst.loss_def.min(), (inst.w_def + inst.loss_def).max()))
        res = solver(inst, j, nu, mu, d0)
        x_ref, _ = maximize_unimodal(lambda x: g_term_x(inst, j, nu + mu, x, d0), 0.0, 1.0, 1e-10)
        worst = max(worst, abs(res.x_star - x_ref))
    return SuiteResult("closed_form_vs_1d", worst <= 1e-6, sites, worst, 1e-6)


def _value_fn(prob: _Problem):
    return lambda v: prob.evaluate(np.maximum(v, 0.0))[0]


def gradient_suite(points: int, seed: int = 5, gradient_fn: Callable = danskin_gradient, h: float = 1e-5) -> SuiteResult:
    """Danskin gradient vs central differences at tie-free dual points."""
    rng = np.random.default_rng(seed)
    worst, checked, skipped = 0.0, 0, 0
    insts = [generate_instance(s, 20) for s in range(4)]
    while checked < points and skipped < 50 * points:
        inst = insts[rng.integers(len(insts))]
        d0 = float(rng.uniform(inst.loss_def.min(), (inst.w_def + inst.loss_def).max()))
        scale = float(np.median(np.exp(inst.lam * inst.reward_att) * inst.w_def))
        v = rng.uniform(h * 10, scale, inst.n_partitions + 1)
        prob = _Problem(inst, np.arange(inst.n_centers), d0, select=True)
        _, _, out = prob.evaluate(v)
        # tie-free: the maximising subset is the same across the whole stencil
        stencil_same = True
        for i in range(v.size):
            for s in (h, -h):
                p = v.copy()
                p[i] += s
                if prob.evaluate(p)[2].subset != out.subset:
                    stencil_same = False
        if not stencil_same or out.tie_detected:
            skipped += 1
            continue
        d_nu, d_mu = gradient_fn(inst, out, d0)
        g = np.concatenate(([d_nu], d_mu))
        fd = finite_diff_grad(_value_fn(prob), v, h)
        worst = max(worst, float(np.max(np.abs(g - fd))))
        checked += 1
    ok = worst <= 1e-4 and checked == points
    return SuiteResult("danskin_vs_fd", ok, checked, worst, 1e-4, detail=f"skipped_ties={skipped}")


def weak_duality_suite(instances: int, seed: int = 0) -> SuiteResult:
    """Every dual value visited by the heuristic bisection upper-bounds the exact primal maximum."""
    from .search import heuristic_solve

    worst, checked = -math.inf, 0
    for i in range(instances):
        n = 4 + i % 5
        inst = generate_instance(seed + i, n, {"n_partitions": 2})
        rep = heuristic_solve(inst)
        for v in rep.inner_diagnostics["visited"]:
            _, primal = primal_bopt_max(inst, v["delta0"])
            worst = max(worst, primal - v["objective"])
            checked += 1
    return SuiteResult("weak_duality", worst <= 1e-6, checked, max(worst, 0.0), 1e-6)


def oracle_suite(instances: int, seed: int = 100) -> SuiteResult:
    from .search import hybrid_solve

    worst, checked = -math.inf, 0
    for i in range(instances):
        n = 4 + i % 5
        inst = generate_instance(seed + i, n, {"n_partitions": 2})
        rep = hybrid_solve(inst)
        orc = brute_force_eqopt(inst)
        worst = max(worst, orc.best_utility - rep.utility - 1e-3)
        checked += 1
    return SuiteResult("oracle_equivalence", worst <= 0.0, checked, max(worst, 0.0), 1e-3, detail="hybrid >= grid - 1e-3")


def run_all(level: str = "fast", gradient_fn: Callable = danskin_gradient) -> list:
    if level not in LEVELS:
        raise ValueError(f"level must be one of {sorted(LEVELS)}")
    cfg = LEVELS[level]
    suites = [
        lambda: lambert_suite(),
        lambda: closed_form_suite(cfg["closed_form_sites"]),
        lambda: gradient_suite(cfg["gradient_points"], gradient_fn=gradient_fn),
        lambda: weak_duality_suite(cfg["weak_instances"]),
        lambda: oracle_suite(cfg["oracle_instances"]),
    ]
    results = []
    for suite in suites:
        t = time.perf_counter()
        res = suite()
        res.seconds = time.perf_counter() - t
        results.append(res)
    return results
