import numpy as np
import pytest

from qsg.dualheur import pgd_solve_fixed_subset
from qsg.errors import DomainError, SizeError
from qsg.model import generate_instance
from qsg.objective import defender_utility
from qsg.oracle import (
    brute_force_eqopt,
    default_resolution,
    dual_grid_min,
    feasible_subsets,
    kkt_fixed_subset,
    primal_bopt_max,
)


def test_single_center():
    inst = generate_instance(0, 1, {"n_partitions": 1, "min_NP": 1, "cap_C": 1, "m": 0.4, "beta": 0.7})
    for method in ("grid", "dual_inner"):
        res = brute_force_eqopt(inst, method=method)
        assert res.best_strategy.coverage[0] == pytest.approx(0.4, abs=1e-9)
        assert res.best_utility == pytest.approx(inst.w_def[0] * 0.4 + inst.loss_def[0])


def test_default_resolution():
    assert default_resolution(5) == 50
    assert default_resolution(8) == 20


@pytest.mark.parametrize("seed", range(3))
def test_grid_and_exact_agree(seed):
    inst = generate_instance(seed, 5, {"n_partitions": 2})
    grid = brute_force_eqopt(inst, method="grid")
    exact = brute_force_eqopt(inst, method="dual_inner")
    assert grid.best_utility <= exact.best_utility + 1e-9
    assert exact.best_utility - grid.best_utility <= grid.error_bound
    assert grid.error_bound == pytest.approx(inst.w_def.sum() / 50)


def test_relabeling_invariance():
    inst = generate_instance(4, 6, {"n_partitions": 2})
    perm = np.array([2, 0, 1, 5, 3, 4])  # stays inside each partition
    fields = {f: np.asarray(getattr(inst, f))[perm] for f in ("reward_def", "loss_def", "reward_att", "loss_att")}
    shuffled = inst.replace(**fields)
    a = brute_force_eqopt(inst, method="dual_inner").best_utility
    b = brute_force_eqopt(shuffled, method="dual_inner").best_utility
    assert a == pytest.approx(b, abs=1e-10)


def test_size_guards():
    with pytest.raises(SizeError):
        brute_force_eqopt(generate_instance(0, 9, {"n_partitions": 2}), method="grid")
    with pytest.raises(SizeError):
        brute_force_eqopt(generate_instance(0, 20), method="dual_inner")
    with pytest.raises(DomainError):
        brute_force_eqopt(generate_instance(0, 5, {"n_partitions": 1}), method="simplex")


def test_feasible_subsets_count():
    inst = generate_instance(0, 4, {"n_partitions": 1, "min_NP": 1, "cap_C": 4})
    assert len(list(feasible_subsets(inst))) == 15


def test_utility_reported_matches_strategy():
    inst = generate_instance(5, 6, {"n_partitions": 2})
    res = brute_force_eqopt(inst, method="dual_inner")
    assert res.best_utility == defender_utility(inst, res.best_strategy)


def test_slack_dual_min_at_origin():
    inst = generate_instance(6, 6, {"n_partitions": 2, "m": 6, "beta": 6})
    subset = (0, 1, 3, 4)
    _, primal = kkt_fixed_subset(inst, subset, -1.0)
    assert dual_grid_min(inst, subset, -1.0, (0, 100), (0, 100), 5) == pytest.approx(primal, rel=1e-9)


@pytest.mark.parametrize("d0", [-4.0, -1.0, 2.0])
def test_dual_grid_bounds(d0):
    inst = generate_instance(7, 6, {"n_partitions": 2})
    subset = (0, 2, 4)
    _, pgd_value, dual = pgd_solve_fixed_subset(inst, subset, d0, 1e-10)
    top = 2 * max(dual.vector().max(), 1.0)
    grid = dual_grid_min(inst, subset, d0, (0, top), (0, top), 21)
    _, primal = primal_bopt_max(inst, d0, subset)
    assert grid >= pgd_value - 1e-4
    assert grid >= primal - 1e-6
