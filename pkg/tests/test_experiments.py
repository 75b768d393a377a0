import csv
import json

import pytest

from qsg.errors import DomainError
from qsg.experiments import ExperimentConfig, rederive_utility, run_experiment
from qsg.cli import main


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_config_validation():
    with pytest.raises(DomainError):
        ExperimentConfig("scalability", [20], repetitions=0)
    with pytest.raises(DomainError):
        ExperimentConfig("scalability", [])
    with pytest.raises(DomainError):
        ExperimentConfig("bogus", [20])


def test_row_counts_and_rederivation(tmp_path):
    cfg = ExperimentConfig("scalability", [20, 40], repetitions=10, output_dir=str(tmp_path))
    result = run_experiment(cfg)
    rows = _rows(tmp_path / "scalability_runs.csv")
    assert len(rows) == 20
    assert not any(r["error"] for r in rows)
    for r in rows[:5]:
        assert rederive_utility(r) == pytest.approx(float(r["utility"]), abs=1e-12)
    agg = _rows(tmp_path / "scalability_aggregate.csv")
    assert {a["n"] for a in agg} == {"20", "40"}
    meta = json.loads((tmp_path / "scalability_metadata.json").read_text())
    assert meta["rows"] == 20 and "hardware" in meta
    assert result["metadata"]["failed_rows"] == 0


def test_fairness_outputs(tmp_path):
    cfg = ExperimentConfig("fairness", [20], repetitions=2, output_dir=str(tmp_path))
    run_experiment(cfg)
    prows = _rows(tmp_path / "fairness_partitions.csv")
    assert len(prows) == 2 * 2 * 5
    for r in prows:
        if r["fsa"] == "True":
            assert float(r["allocation"]) <= float(r["beta"]) + 1e-6


def test_pwla_gap_column(tmp_path):
    cfg = ExperimentConfig("pwla_convergence", [10], repetitions=1, output_dir=str(tmp_path), pieces=[5, 10],
                           ref_pieces=20, epsilon=1e-2)
    run_experiment(cfg)
    rows = _rows(tmp_path / "pwla_convergence_runs.csv")
    assert [r["pieces"] for r in rows] == ["5", "10"]
    assert all(float(r["gap_pct"]) >= 0 for r in rows)


def test_failures_are_recorded(tmp_path):
    cfg = ExperimentConfig("expected_reward", [20], repetitions=1, methods=["heuristic", "milp"],
                           solver_command="/nonexistent/solver", output_dir=str(tmp_path))
    run_experiment(cfg)
    rows = _rows(tmp_path / "expected_reward_runs.csv")
    by_method = {r["method"]: r for r in rows}
    assert by_method["heuristic"]["error"] == ""
    assert "SolverConfigError" in by_method["milp"]["error"]


def test_cli_experiment(tmp_path, capsys):
    assert main(["experiment", "scalability", "--sizes", "20", "--repetitions", "2", "--out", str(tmp_path)]) == 0
    assert "2 rows" in capsys.readouterr().out
