"""``qsg`` command line: solve, generate, experiment and verify.

Exit codes: 0 success, 1 unexpected failure or failed verification, 2 usage,
3 invalid input, 4 size guard, 5 solver configuration, 6 infeasible,
7 solver timeout, 8 unusable solver output.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import QsgError, SizeError, SolverConfigError
from .experiments import EXPERIMENTS, ExperimentConfig, run_experiment
from .milp import BUILTIN_SOLVER, DEFAULT_PIECES, SOLVER_ENV, resolve_solver
from .model import generate_instance, instance_summary, read_instance, write_instance
from .search import DEFAULT_EPSILON, METHODS, SolveReport


def _int_list(text: str) -> list:
    try:
        return [int(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}") from None


def _override(text: str):
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    try:
        parsed = json.loads(value)
    except json.JSONDecodeError:
        parsed = value
    return key.strip(), parsed


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qsg", description="Center selection and security allocation against a QR attacker.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve one instance file")
    s.add_argument("instance")
    s.add_argument("--method", choices=METHODS, default="hybrid")
    s.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    s.add_argument("--xi", type=float, default=None)
    s.add_argument("--pieces", type=int, default=DEFAULT_PIECES)
    s.add_argument("--solver-cmd", default=None, help=f"MILP solver command, or {BUILTIN_SOLVER}; default ${SOLVER_ENV}")
    s.add_argument("--timeout", type=float, default=600.0)
    s.add_argument("--oracle-method", choices=("grid", "dual_inner"), default="dual_inner")
    s.add_argument("--out", default=None, help="write the report as JSON here")

    g = sub.add_parser("generate", help="generate a random instance file")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--n", type=int, required=True, dest="n_centers")
    g.add_argument("--set", type=_override, action="append", default=[], metavar="KEY=VALUE",
                   help="override a default (lambda, m, cap_C, min_NP, n_partitions, beta)")
    g.add_argument("--fairness-scenario", action="store_true", help="shift attacker rewards of partition 0 by 5 and set beta = 1.2 m / L")
    g.add_argument("--out", required=True)

    e = sub.add_parser("experiment", help="run an experiment sweep")
    e.add_argument("name", choices=EXPERIMENTS)
    e.add_argument("--sizes", type=_int_list, required=True)
    e.add_argument("--repetitions", type=int, default=10)
    e.add_argument("--seed", type=int, default=0, help="seed base; run i uses seed + i")
    e.add_argument("--method", action="append", dest="methods", choices=[m for m in METHODS if m != "oracle"])
    e.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    e.add_argument("--xi", type=float, default=None)
    e.add_argument("--pieces", type=_int_list, default=[5, 10, 15, 20, 25, 30])
    e.add_argument("--ref-pieces", type=int, default=200)
    e.add_argument("--solver-cmd", default=None)
    e.add_argument("--workers", type=int, default=1)
    e.add_argument("--out", default="results")

    v = sub.add_parser("verify", help="run the self-check suites")
    v.add_argument("--level", choices=("fast", "full"), default="fast")
    return p


def _solve(args) -> SolveReport:
    from .baselines import convex_opt, two_steps
    from .oracle import brute_force_eqopt
    from .search import heuristic_solve, hybrid_solve, milp_solve

    inst = read_instance(args.instance)
    if args.method == "hybrid":
        return hybrid_solve(inst, args.epsilon, args.xi, args.pieces, args.solver_cmd, timeout=args.timeout)
    if args.method == "heuristic":
        return heuristic_solve(inst, args.epsilon, args.xi)
    if args.method == "convexopt":
        return convex_opt(inst, args.epsilon, args.xi)
    if args.method == "twosteps":
        return two_steps(inst, args.epsilon, args.xi)
    if args.method == "milp":
        if resolve_solver(args.solver_cmd) is None:
            raise SolverConfigError(
                f"method milp needs a MILP solver: pass --solver-cmd {BUILTIN_SOLVER} for the bundled HiGHS, "
                f"--solver-cmd PATH for an external executable, or set {SOLVER_ENV}"
            )
        return milp_solve(inst, args.epsilon, args.pieces, args.solver_cmd, args.timeout)
    if args.method == "oracle":
        import time

        start = time.perf_counter()
        res = brute_force_eqopt(inst, method=args.oracle_method)
        return SolveReport(
            delta0_final=res.best_utility,
            strategy=res.best_strategy,
            utility=res.best_utility,
            bound_gap=res.error_bound,
            method="oracle",
            bisect_iterations=0,
            inner_diagnostics={"subsets_evaluated": res.subsets_evaluated, "oracle_method": res.method},
            wall_time=time.perf_counter() - start,
        )
    raise SizeError(f"unknown method {args.method}")


def _print_report(report: SolveReport):
    print(f"method      {report.method}")
    print(f"utility     {report.utility:.10g}")
    print(f"delta0      {report.delta0_final:.10g}")
    print(f"bound_gap   {report.bound_gap:.3e}")
    print(f"subset      {' '.join(map(str, report.strategy.subset))}")
    print(f"coverage    {' '.join(f'{v:.6f}' for v in report.strategy.coverage)}")
    print(f"iterations  {report.bisect_iterations}")
    print(f"wall_time   {report.wall_time:.3f}s")
    for w in report.warnings:
        print(f"warning     {w}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "solve":
            report = _solve(args)
            _print_report(report)
            if args.out:
                Path(args.out).write_text(json.dumps(report.to_dict(), indent=2) + "\n")
            return 0
        if args.command == "generate":
            inst = generate_instance(args.seed, args.n_centers, dict(args.set))
            if args.fairness_scenario:
                from .model import apply_fairness_scenario

                inst = apply_fairness_scenario(inst)
            write_instance(inst, args.out)
            print(instance_summary(inst))
            return 0
        if args.command == "experiment":
            cfg = ExperimentConfig(
                experiment=args.name,
                sizes=args.sizes,
                repetitions=args.repetitions,
                seed_base=args.seed,
                methods=args.methods or [],
                output_dir=args.out,
                epsilon=args.epsilon,
                xi=args.xi,
                pieces=args.pieces,
                ref_pieces=args.ref_pieces,
                solver_command=args.solver_cmd or resolve_solver(None) or BUILTIN_SOLVER,
                workers=args.workers,
            )
            result = run_experiment(cfg)
            meta = result["metadata"]
            print(f"{meta['rows']} rows ({meta['failed_rows']} failed) in {meta['total_wall_time']:.1f}s -> {args.out}")
            for name in meta["files"]:
                print(f"  {name}")
            return 0
        if args.command == "verify":
            from .verify import run_all

            results = run_all(args.level)
            for r in results:
                print(r.line() + f"  ({r.seconds:.1f}s)")
            failed = [r for r in results if not r.passed]
            print(f"{len(results) - len(failed)}/{len(results)} suites passed")
            return 1 if failed else 0
    except QsgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 1


if __name__ == "__main__":
    raise SystemExit(main())
