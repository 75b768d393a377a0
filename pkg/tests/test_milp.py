import dataclasses
import shutil
import sys

import numpy as np
import pytest

from qsg.errors import InfeasibleError, SizeError, SolverConfigError, SolverTimeoutError
from qsg.milp import (
    BUILTIN_SOLVER,
    Row,
    build_pwla,
    check_assignment,
    check_fill_discipline,
    encode_strategy,
    export_lp,
    lp_text,
    objective_value,
    read_lp,
    solve_builtin,
    solve_external,
    solve_pwla,
    solve_small_exact,
)
from qsg.model import generate_instance
from qsg.objective import Strategy, bopt_value
from qsg.oracle import primal_bopt_max

BRIDGE = shutil.which("qsg-milp-bridge") or f"{sys.executable} -m qsg.bridge"


def test_variable_counts():
    inst = generate_instance(1, 20)
    model = build_pwla(inst, 0.0, 20)
    names = model.variables
    assert sum(v.startswith("t_") for v in names) == 20
    assert sum(v.startswith("r_") for v in names) == 400
    assert sum(v.startswith("z_") for v in names) == 400
    assert {v for v in names if v.startswith("t_")} <= model.binaries
    n, K = 20, 20
    assert model.coupling_row_count() == n + n * (K - 1) + n * K + n * (K - 1)


@pytest.mark.parametrize("K", [5, 20])
def test_exact_on_grid_points(K):
    inst = generate_instance(2, 12)
    model = build_pwla(inst, -1.5, K)
    rng = np.random.default_rng(K)
    for _ in range(20):
        subset = (0, 3, 5, 7, 9, 11)
        x = rng.integers(0, K + 1, size=6) / K
        s = Strategy(subset, x)
        values = encode_strategy(model, s)
        b = bopt_value(inst, s, -1.5)
        assert objective_value(model, values) == pytest.approx(b, rel=1e-12, abs=1e-9)
        assert check_fill_discipline(model, values)


def test_off_grid_error_shrinks_with_pieces():
    inst = generate_instance(3, 10)
    subset = tuple(range(0, 10, 2))
    rng = np.random.default_rng(0)
    xs = rng.uniform(0, 1, size=(50, 5))
    worst = {}
    for K in (5, 10, 20, 40):
        model = build_pwla(inst, 0.0, K)
        worst[K] = max(
            abs(objective_value(model, encode_strategy(model, Strategy(subset, x))) - bopt_value(inst, Strategy(subset, x), 0.0))
            for x in xs
        )
    c = worst[5] * 5
    for K, err in worst.items():
        assert err <= c / K * 1.0001
    assert worst[40] < worst[20] < worst[10] < worst[5]


def test_printed_objective_form_differs():
    inst = generate_instance(3, 10)
    a = build_pwla(inst, 0.0, 10)
    b = build_pwla(inst, 0.0, 10, objective_form="printed")
    assert a.objective != b.objective


def test_lp_small_model(tmp_path):
    inst = generate_instance(0, 3, {"n_partitions": 1, "min_NP": 1, "cap_C": 3, "m": 1})
    model = build_pwla(inst, 0.0, 2)
    assert len(model.variables) == 3 + 12
    path = export_lp(model, tmp_path / "m.lp")
    prob = read_lp(path)
    assert prob.variables == model.variables
    assert prob.binaries == model.binaries
    assert len(prob.rows) == len(model.rows)
    for a, b in zip(prob.rows, model.rows):
        assert a.name == b.name and a.sense == b.sense and a.rhs == b.rhs
        assert a.coeffs == pytest.approx(b.coeffs)


def test_lp_export_deterministic(tmp_path):
    inst = generate_instance(5, 10)
    p1 = export_lp(build_pwla(inst, -2.0, 8), tmp_path / "a.lp")
    p2 = export_lp(build_pwla(inst, -2.0, 8), tmp_path / "b.lp")
    assert p1.read_bytes() == p2.read_bytes()
    assert all(len(line) <= 80 for line in p1.read_text().splitlines())


def test_lp_round_trip_solves_the_same():
    inst = generate_instance(5, 8, {"n_partitions": 2})
    model = build_pwla(inst, -2.0, 10)
    direct = solve_builtin(model)
    text_model = read_lp_from_text(lp_text(model))
    from qsg.milp import solve_lp_problem

    status, _, obj = solve_lp_problem(text_model)
    assert status == "optimal"
    assert obj == pytest.approx(direct.objective, rel=1e-9, abs=1e-6)


def read_lp_from_text(text):
    import tempfile
    from pathlib import Path

    with tempfile.TemporaryDirectory() as d:
        p = Path(d) / "m.lp"
        p.write_text(text)
        return read_lp(p)


def test_external_bridge_matches_builtin():
    inst = generate_instance(6, 8, {"n_partitions": 2})
    model = build_pwla(inst, -1.0, 12)
    ext = solve_external(model, BRIDGE, timeout=120)
    ref = solve_builtin(model)
    assert ext.objective == pytest.approx(ref.objective, abs=1e-6)
    assert not check_assignment(model, ext.values)


def test_solution_maps_to_exact_value():
    inst = generate_instance(3, 6, {"n_partitions": 2})
    d0 = -3.0
    _, exact = solve_small_exact(inst, d0)
    for K in (20, 100):
        sol = solve_pwla(build_pwla(inst, d0, K), BUILTIN_SOLVER)
        mapped = bopt_value(inst, sol.strategy, d0)
        assert sol.objective == pytest.approx(mapped, abs=1e-4)
        assert mapped <= exact + 1e-6
    assert exact - mapped <= 1e-3 * abs(exact)


def test_forced_infeasible_model():
    inst = generate_instance(0, 6, {"n_partitions": 2})
    model = build_pwla(inst, 0.0, 4)
    model.rows = [dataclasses.replace(r, rhs=inst.cap_C + 1.0) if r.name == "card_min" else r for r in model.rows]
    with pytest.raises(InfeasibleError):
        solve_external(model, BRIDGE, timeout=60)
    with pytest.raises(InfeasibleError):
        solve_builtin(model)


def test_zero_timeout():
    model = build_pwla(generate_instance(0, 6, {"n_partitions": 2}), 0.0, 4)
    with pytest.raises(SolverTimeoutError):
        solve_external(model, BRIDGE, timeout=0)


def test_missing_solver(monkeypatch):
    monkeypatch.delenv("QSG_MILP_SOLVER", raising=False)
    model = build_pwla(generate_instance(0, 6, {"n_partitions": 2}), 0.0, 4)
    with pytest.raises(SolverConfigError, match="--solver-cmd"):
        solve_pwla(model)
    with pytest.raises(SolverConfigError):
        solve_external(model, "/nonexistent/solver")


def test_small_exact_matches_exact_primal():
    inst = generate_instance(11, 4, {"n_partitions": 1, "min_NP": 1, "cap_C": 4, "m": 1.0})
    for d0 in (-4.0, 0.0, 3.0):
        strategy, value = solve_small_exact(inst, d0)
        _, ref = primal_bopt_max(inst, d0)
        assert value == pytest.approx(ref, rel=1e-6, abs=1e-6)
        assert bopt_value(inst, strategy, d0) == pytest.approx(value, rel=1e-12)


def test_small_exact_single_subset():
    inst = generate_instance(12, 5, {"n_partitions": 1, "min_NP": 5, "cap_C": 5})
    strategy, _ = solve_small_exact(inst, 0.0)
    assert strategy.subset == (0, 1, 2, 3, 4)


def test_small_exact_large_threshold_negative():
    inst = generate_instance(13, 6, {"n_partitions": 2})
    _, value = solve_small_exact(inst, float(inst.reward_def.max()) + 1)
    assert value < 0


def test_small_exact_size_guard():
    with pytest.raises(SizeError):
        solve_small_exact(generate_instance(0, 20), 0.0)
