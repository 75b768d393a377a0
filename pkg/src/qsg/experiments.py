"""Experiment runners that write per-run CSV rows, aggregates and metadata.

Every run is identified by ``(experiment, n, run_index)`` and uses the seed
``seed_base + run_index``; scenario flags are stored in the row, so the
instance and the utility of the stored strategy can always be rebuilt.
"""

from __future__ import annotations

import csv
import json
import math
import os
import platform
import statistics
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DomainError
from .model import apply_fairness_scenario, generate_instance, without_fsa
from .objective import Strategy, defender_utility

EXPERIMENTS = ("pwla_convergence", "expected_reward", "scalability", "fairness")
DEFAULT_METHODS = {
    "pwla_convergence": ["milp"],
    "expected_reward": ["hybrid", "heuristic", "convexopt", "twosteps"],
    "scalability": ["heuristic"],
    "fairness": ["hybrid"],
}
RUN_COLUMNS = [
    "experiment", "seed", "n", "m", "scenario", "method", "pieces", "utility", "wall_time",
    "bisect_iterations", "tie_count", "bound_gap", "ref_pieces", "ref_utility", "gap_pct",
    "subset", "coverage", "error",
]
PARTITION_COLUMNS = ["seed", "n", "scenario", "fsa", "partition", "allocation", "beta"]


@dataclass
class ExperimentConfig:
    experiment: str
    sizes: list
    repetitions: int = 10
    seed_base: int = 0
    methods: list = field(default_factory=list)
    output_dir: str = "results"
    epsilon: float = 1e-3
    xi: float | None = None
    pieces: list = field(default_factory=lambda: [5, 10, 15, 20, 25, 30])
    ref_pieces: int = 200
    solver_command: str | None = "builtin:highs"
    workers: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise DomainError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        if self.repetitions < 1:
            raise DomainError("repetitions must be >= 1")
        if not self.sizes:
            raise DomainError("sizes must be nonempty")
        if not self.methods:
            self.methods = list(DEFAULT_METHODS[self.experiment])


def _fmt_subset(strategy: Strategy) -> str:
    return " ".join(str(j) for j in strategy.subset)


def _fmt_cover(strategy: Strategy) -> str:
    return " ".join(repr(float(v)) for v in strategy.coverage)


def scenario_instance(seed: int, n: int, scenario: str):
    inst = generate_instance(seed, n)
    if scenario in ("fairness_fsa", "fairness_nofsa"):
        inst = apply_fairness_scenario(inst)
        if scenario == "fairness_nofsa":
            inst = without_fsa(inst)
    elif scenario != "default":
        raise DomainError(f"unknown scenario {scenario!r}")
    return inst


def rederive_utility(row: dict) -> float:
    """Utility of a CSV row's strategy, rebuilt from its seed and scenario."""
    inst = scenario_instance(int(row["seed"]), int(row["n"]), row["scenario"])
    subset = tuple(int(v) for v in row["subset"].split())
    cover = np.array([float(v) for v in row["coverage"].split()])
    return defender_utility(inst, Strategy(subset, cover))


def run_method(inst, method: str, cfg: ExperimentConfig, pieces: int | None = None):
    from .baselines import convex_opt, two_steps
    from .search import heuristic_solve, hybrid_solve, milp_solve

    if method == "hybrid":
        return hybrid_solve(inst, cfg.epsilon, cfg.xi, pieces or 20, cfg.solver_command)
    if method == "heuristic":
        return heuristic_solve(inst, cfg.epsilon, cfg.xi)
    if method == "convexopt":
        return convex_opt(inst, cfg.epsilon, cfg.xi)
    if method == "twosteps":
        return two_steps(inst, cfg.epsilon, cfg.xi)
    if method == "milp":
        return milp_solve(inst, cfg.epsilon, pieces or 20, cfg.solver_command)
    raise DomainError(f"method {method!r} is not available in experiments")


def _row(cfg, seed, inst, scenario, method, report=None, error="", pieces=""):
    base = {
        "experiment": cfg.experiment, "seed": seed, "n": inst.n_centers, "m": inst.m,
        "scenario": scenario, "method": method, "pieces": pieces, "error": error,
    }
    if report is not None:
        base.update(
            utility=repr(report.utility),
            wall_time=report.wall_time,
            bisect_iterations=report.bisect_iterations,
            tie_count=report.inner_diagnostics.get("tie_count", 0),
            bound_gap=report.bound_gap,
            subset=_fmt_subset(report.strategy),
            coverage=_fmt_cover(report.strategy),
        )
    return base


def _partition_rows(seed, inst, scenario, fsa, strategy):
    x = strategy.dense(inst.n_centers)
    return [
        {"seed": seed, "n": inst.n_centers, "scenario": scenario, "fsa": fsa, "partition": l,
         "allocation": repr(float(x[list(members)].sum())), "beta": float(inst.beta[l])}
        for l, members in enumerate(inst.partitions)
    ]


def run_one(cfg: ExperimentConfig, n: int, run_index: int):
    """All rows produced by one (size, repetition) pair: ``(rows, partition_rows)``."""
    seed = cfg.seed_base + run_index
    rows, prows = [], []
    if cfg.experiment == "fairness":
        plans = [("fairness_fsa", True), ("fairness_nofsa", False)]
    else:
        plans = [("default", True)]
    for scenario, fsa in plans:
        inst = scenario_instance(seed, n, scenario)
        for method in cfg.methods:
            if cfg.experiment == "pwla_convergence":
                rows.extend(_pwla_rows(cfg, seed, inst, method))
                continue
            try:
                report = run_method(inst, method, cfg)
            except Exception as exc:  # recorded per row, the sweep goes on
                rows.append(_row(cfg, seed, inst, scenario, method, error=f"{type(exc).__name__}: {exc}"))
                continue
            rows.append(_row(cfg, seed, inst, scenario, method, report))
            if cfg.experiment == "fairness":
                prows.extend(_partition_rows(seed, inst, scenario, fsa, report.strategy))
    return rows, prows


def _pwla_rows(cfg, seed, inst, method):
    rows = []
    try:
        ref = run_method(inst, method, cfg, pieces=cfg.ref_pieces)
    except Exception as exc:
        return [_row(cfg, seed, inst, "default", method, error=f"reference: {type(exc).__name__}: {exc}", pieces=cfg.ref_pieces)]
    for K in cfg.pieces:
        try:
            rep = run_method(inst, method, cfg, pieces=K)
        except Exception as exc:
            rows.append(_row(cfg, seed, inst, "default", method, error=f"{type(exc).__name__}: {exc}", pieces=K))
            continue
        row = _row(cfg, seed, inst, "default", method, rep, pieces=K)
        row.update(
            ref_pieces=cfg.ref_pieces,
            ref_utility=repr(ref.utility),
            gap_pct=100.0 * abs(rep.utility - ref.utility) / max(abs(ref.utility), 1e-12),
        )
        rows.append(row)
    return rows


def _job(args):
    cfg, n, run_index = args
    try:
        return run_one(cfg, n, run_index)
    except Exception:
        return [{"experiment": cfg.experiment, "seed": cfg.seed_base + run_index, "n": n,
                 "error": traceback.format_exc(limit=3)}], []


def _se(values):
    return statistics.stdev(values) / math.sqrt(len(values)) if len(values) > 1 else 0.0


def aggregate(rows: Sequence[dict]) -> list:
    groups: dict = {}
    for r in rows:
        if r.get("error") or r.get("utility") in (None, ""):
            continue
        key = (r["experiment"], r["n"], r["scenario"], r["method"], r.get("pieces", ""))
        groups.setdefault(key, []).append(r)
    out = []
    for key in sorted(groups, key=lambda k: tuple(str(v).zfill(8) for v in k)):
        rs = groups[key]
        util = [float(r["utility"]) for r in rs]
        wall = [float(r["wall_time"]) for r in rs]
        agg = {
            "experiment": key[0], "n": key[1], "scenario": key[2], "method": key[3], "pieces": key[4],
            "runs": len(rs), "mean_utility": statistics.fmean(util), "se_utility": _se(util),
            "median_wall_time": statistics.median(wall), "mean_wall_time": statistics.fmean(wall),
            "se_wall_time": _se(wall),
        }
        gaps = [float(r["gap_pct"]) for r in rs if r.get("gap_pct") not in (None, "")]
        if gaps:
            agg["mean_gap_pct"] = statistics.fmean(gaps)
            agg["se_gap_pct"] = _se(gaps)
        out.append(agg)
    return out


def hardware_metadata() -> dict:
    return {
        "platform": platform.platform(),
        "processor": platform.processor() or platform.machine(),
        "cpu_count": os.cpu_count(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "timing": "wall clock per run (time.perf_counter); medians over repetitions in the aggregate file",
    }


def _write_csv(path: Path, rows, columns):
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({c: r.get(c, "") for c in columns})


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Run every (size, repetition) job, then write CSV and metadata files."""
    start = time.perf_counter()
    jobs = [(cfg, n, i) for n in cfg.sizes for i in range(cfg.repetitions)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_job, jobs))
    else:
        results = [_job(j) for j in jobs]
    rows = [r for res in results for r in res[0]]
    prows = [r for res in results for r in res[1]]
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / f"{cfg.experiment}_runs.csv", rows, RUN_COLUMNS)
    agg = aggregate(rows)
    agg_cols = ["experiment", "n", "scenario", "method", "pieces", "runs", "mean_utility", "se_utility",
                "median_wall_time", "mean_wall_time", "se_wall_time", "mean_gap_pct", "se_gap_pct"]
    _write_csv(out / f"{cfg.experiment}_aggregate.csv", agg, agg_cols)
    files = [f"{cfg.experiment}_runs.csv", f"{cfg.experiment}_aggregate.csv"]
    if cfg.experiment == "fairness":
        _write_csv(out / "fairness_partitions.csv", prows, PARTITION_COLUMNS)
        files.append("fairness_partitions.csv")
    meta = {
        "config": asdict(cfg),
        "hardware": hardware_metadata(),
        "total_wall_time": time.perf_counter() - start,
        "rows": len(rows),
        "failed_rows": sum(1 for r in rows if r.get("error")),
        "files": files,
    }
    (out / f"{cfg.experiment}_metadata.json").write_text(json.dumps(meta, indent=2, default=str))
    return {"rows": rows, "partition_rows": prows, "aggregate": agg, "metadata": meta}
