"""Comparison methods without joint subset selection.

``convex_opt`` operates every center and only optimises coverage.
``two_steps`` ranks centers by their payoff under the ConvexOpt coverage,
keeps the best ones, then re-optimises coverage on that fixed subset.
"""

from __future__ import annotations

import time

import numpy as np

from .model import GameInstance
from .search import DEFAULT_EPSILON, SolveReport, binary_search, default_xi, fixed_subset_inner


def convex_opt(inst: GameInstance, epsilon: float = DEFAULT_EPSILON, xi: float | None = None) -> SolveReport:
    xi = default_xi(epsilon) if xi is None else xi
    everything = tuple(range(inst.n_centers))
    report = binary_search(inst, fixed_subset_inner(inst, everything, xi), epsilon, method="convexopt")
    return report


def select_two_steps(inst: GameInstance, scores: np.ndarray) -> tuple[int, ...]:
    """Top ``N_P`` scores, then up to ``C - N_P`` more positive ones, then a partition-cover patch."""
    n = inst.n_centers
    order = np.lexsort((np.arange(n), -scores))
    chosen = list(order[: inst.min_NP])
    for j in order[inst.min_NP :]:
        if len(chosen) >= inst.cap_C or scores[j] <= 0:
            break
        chosen.append(j)
    chosen = [int(j) for j in chosen]
    part = inst.part_of
    for l in range(inst.n_partitions):
        if any(part[j] == l for j in chosen):
            continue
        best_in_l = max(inst.partitions[l], key=lambda j: (scores[j], -j))
        counts = np.bincount(part[chosen], minlength=inst.n_partitions)
        # lowest-scored selected center whose partition keeps another member
        removable = [j for j in chosen if counts[part[j]] > 1]
        drop = min(removable, key=lambda j: (scores[j], -j))
        chosen[chosen.index(drop)] = int(best_in_l)
    return tuple(sorted(chosen))


def two_steps(inst: GameInstance, epsilon: float = DEFAULT_EPSILON, xi: float | None = None) -> SolveReport:
    start = time.perf_counter()
    xi = default_xi(epsilon) if xi is None else xi
    first = convex_opt(inst, epsilon, xi)
    x_all = first.strategy.dense(inst.n_centers)
    scores = inst.w_def * x_all + inst.loss_def
    subset = select_two_steps(inst, scores)
    report = binary_search(inst, fixed_subset_inner(inst, subset, xi), epsilon, method="twosteps")
    report.inner_diagnostics["first_step_utility"] = first.utility
    report.inner_diagnostics["selected"] = list(subset)
    report.wall_time = time.perf_counter() - start
    return report
