"""Piecewise-linear MILP for the inner BOPT problem.

Coverage of center j is split into K increments ``r_jk`` in [0, 1/K] filled
in order, ``x_j = sum_k r_jk``. Binary ``z_jk`` marks a full increment and
binary ``theta_j`` marks an operated center. With slopes

    gamma^N_jk = K (N_j(k/K) - N_j((k-1)/K))
    gamma^g_jk = K (g_j(k/K) - g_j((k-1)/K)),   g_j(x) = N_j(x) (w^d_j x + l^d_j)

the objective

    sum_j theta_j (g_j(0) - delta0 N_j(0)) + sum_jk (gamma^g_jk - delta0 gamma^N_jk) r_jk

matches B exactly whenever every x_j is a multiple of 1/K.

Rows (in this order): budget, one cap per partition, ``r_j1 <= theta_j / K``,
``z_jk >= z_j,k+1``, ``r_jk >= z_jk / K``, ``r_j,k+1 <= z_jk / K``, the
cardinality window and one cover row per partition. Budget and cap rows are
written multiplied by K.

Models can be written to (and read back from) CPLEX LP text, solved in
process with HiGHS through ``scipy.optimize.milp``, or handed to an external
solver command.
"""

from __future__ import annotations

import math
import os
import re
import shlex
import shutil
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp
from scipy.sparse import coo_matrix

from .errors import (
    DomainError,
    InfeasibleError,
    SizeError,
    SolverConfigError,
    SolverOutputError,
    SolverTimeoutError,
)
from .model import GameInstance
from .objective import Strategy, bopt_value_dense

SMALL_EXACT_MAX_CENTERS = 16
DEFAULT_PIECES = 20
BUILTIN_SOLVER = "builtin:highs"
SOLVER_ENV = "QSG_MILP_SOLVER"
CHECK_TOL = 1e-6


@dataclass
class Row:
    name: str
    coeffs: dict  # variable name -> coefficient
    sense: str  # "<=", ">=" or "="
    rhs: float


@dataclass
class PwlaModel:
    pieces: int
    delta0: float
    n_centers: int
    gamma_N: np.ndarray  # (n, K)
    gamma_g: np.ndarray  # (n, K)
    const_term: np.ndarray  # (n,) g_j(0) - delta0 N_j(0)
    objective_form: str
    variables: list  # names in column order
    binaries: set
    upper: dict  # name -> upper bound
    objective: dict  # name -> coefficient
    rows: list = field(default_factory=list)
    partitions: tuple = ()

    @property
    def theta_names(self):
        return [theta_name(j) for j in range(self.n_centers)]

    def column(self) -> dict:
        return {name: i for i, name in enumerate(self.variables)}

    def coupling_row_count(self) -> int:
        prefixes = ("link_", "order_", "fill_", "next_")
        return sum(1 for r in self.rows if r.name.startswith(prefixes))


def theta_name(j: int) -> str:
    return f"t_{j}"


def r_name(j: int, k: int) -> str:
    return f"r_{j}_{k}"


def z_name(j: int, k: int) -> str:
    return f"z_{j}_{k}"


def _n_and_g(inst: GameInstance, x: np.ndarray):
    n_x = np.exp(inst.lam * (inst.reward_att[:, None] - inst.w_att[:, None] * x))
    return n_x, n_x * (inst.w_def[:, None] * x + inst.loss_def[:, None])


def build_pwla(inst: GameInstance, delta0: float, pieces: int = DEFAULT_PIECES, objective_form: str = "consistent") -> PwlaModel:
    """Build the piecewise-linear model for threshold ``delta0``.

    ``objective_form="printed"`` reproduces the literal constant term
    ``K * sum theta_j (g_j(0) - delta0 g_j(0))`` for comparison only.
    """
    K = int(pieces)
    if K <= 0 or K != pieces:
        raise DomainError(f"pieces must be a positive integer, got {pieces!r}")
    if objective_form not in ("consistent", "printed"):
        raise DomainError(f"unknown objective form {objective_form!r}")
    n = inst.n_centers
    grid = np.arange(K + 1) / K
    n_x, g_x = _n_and_g(inst, grid[None, :])
    gamma_N = K * np.diff(n_x, axis=1)
    gamma_g = K * np.diff(g_x, axis=1)
    if objective_form == "consistent":
        const = g_x[:, 0] - delta0 * n_x[:, 0]
    else:
        const = K * (g_x[:, 0] - delta0 * g_x[:, 0])
    # one full increment r = 1/K contributes gamma / K, the change of the function over the piece
    slope = gamma_g - delta0 * gamma_N

    variables, binaries, upper, objective = [], set(), {}, {}
    for j in range(n):
        variables.append(theta_name(j))
        binaries.add(theta_name(j))
        upper[theta_name(j)] = 1.0
        objective[theta_name(j)] = float(const[j])
    for j in range(n):
        for k in range(1, K + 1):
            variables.append(r_name(j, k))
            upper[r_name(j, k)] = 1.0 / K
            objective[r_name(j, k)] = float(slope[j, k - 1])
    for j in range(n):
        for k in range(1, K + 1):
            variables.append(z_name(j, k))
            binaries.add(z_name(j, k))
            upper[z_name(j, k)] = 1.0
            objective[z_name(j, k)] = 0.0

    rows = [Row("budget", {r_name(j, k): float(K) for j in range(n) for k in range(1, K + 1)}, "<=", K * inst.m)]
    for l, members in enumerate(inst.partitions):
        rows.append(Row(f"fsa_{l}", {r_name(j, k): float(K) for j in members for k in range(1, K + 1)}, "<=", K * float(inst.beta[l])))
    for j in range(n):
        rows.append(Row(f"link_{j}", {r_name(j, 1): float(K), theta_name(j): -1.0}, "<=", 0.0))
    for j in range(n):
        for k in range(1, K):
            rows.append(Row(f"order_{j}_{k}", {z_name(j, k): 1.0, z_name(j, k + 1): -1.0}, ">=", 0.0))
    for j in range(n):
        for k in range(1, K + 1):
            rows.append(Row(f"fill_{j}_{k}", {r_name(j, k): float(K), z_name(j, k): -1.0}, ">=", 0.0))
    for j in range(n):
        for k in range(1, K):
            rows.append(Row(f"next_{j}_{k}", {r_name(j, k + 1): float(K), z_name(j, k): -1.0}, "<=", 0.0))
    card = {theta_name(j): 1.0 for j in range(n)}
    rows.append(Row("card_min", dict(card), ">=", float(inst.min_NP)))
    rows.append(Row("card_max", dict(card), "<=", float(inst.cap_C)))
    for l, members in enumerate(inst.partitions):
        rows.append(Row(f"cover_{l}", {theta_name(j): 1.0 for j in members}, ">=", 1.0))

    return PwlaModel(
        pieces=K,
        delta0=float(delta0),
        n_centers=n,
        gamma_N=gamma_N,
        gamma_g=gamma_g,
        const_term=np.asarray(g_x[:, 0] - delta0 * n_x[:, 0]),
        objective_form=objective_form,
        variables=variables,
        binaries=binaries,
        upper=upper,
        objective=objective,
        rows=rows,
        partitions=inst.partitions,
    )


def encode_strategy(model: PwlaModel, strategy: Strategy) -> dict:
    """The (theta, r, z) assignment that represents a strategy."""
    K = model.pieces
    values = {name: 0.0 for name in model.variables}
    for j, x in zip(strategy.subset, strategy.coverage):
        values[theta_name(j)] = 1.0
        full = min(int(math.floor(x * K + 1e-12)), K)
        for k in range(1, K + 1):
            if k <= full:
                values[r_name(j, k)] = 1.0 / K
                values[z_name(j, k)] = 1.0
            elif k == full + 1:
                values[r_name(j, k)] = max(x - full / K, 0.0)
    return values


def objective_value(model: PwlaModel, values: dict) -> float:
    return float(sum(c * values.get(name, 0.0) for name, c in model.objective.items()))


def decode(model: PwlaModel, values: dict) -> Strategy:
    K = model.pieces
    subset, cover = [], []
    for j in range(model.n_centers):
        if values.get(theta_name(j), 0.0) > 0.5:
            subset.append(j)
            cover.append(min(max(sum(values.get(r_name(j, k), 0.0) for k in range(1, K + 1)), 0.0), 1.0))
    return Strategy(tuple(subset), np.array(cover))


def check_assignment(model: PwlaModel, values: dict, tol: float = CHECK_TOL) -> list:
    """Violated rows, bounds and integrality, as human-readable strings."""
    problems = []
    for name in model.variables:
        v = values.get(name, 0.0)
        if v < -tol or v > model.upper[name] + tol:
            problems.append(f"{name}={v} outside [0, {model.upper[name]}]")
        if name in model.binaries and min(abs(v), abs(v - 1.0)) > tol:
            problems.append(f"{name}={v} is not binary")
    for row in model.rows:
        lhs = sum(c * values.get(v, 0.0) for v, c in row.coeffs.items())
        scale = max(1.0, abs(row.rhs))
        if row.sense == "<=" and lhs > row.rhs + tol * scale:
            problems.append(f"{row.name}: {lhs} > {row.rhs}")
        elif row.sense == ">=" and lhs < row.rhs - tol * scale:
            problems.append(f"{row.name}: {lhs} < {row.rhs}")
        elif row.sense == "=" and abs(lhs - row.rhs) > tol * scale:
            problems.append(f"{row.name}: {lhs} != {row.rhs}")
    return problems


def check_fill_discipline(model: PwlaModel, values: dict, tol: float = CHECK_TOL) -> bool:
    """r_jk is a full increment whenever z_jk = 1."""
    K = model.pieces
    for j in range(model.n_centers):
        for k in range(1, K + 1):
            if values.get(z_name(j, k), 0.0) > 0.5 and values.get(r_name(j, k), 0.0) < 1.0 / K - tol:
                return False
    return True


# --------------------------------------------------------------------------
# LP text format
# --------------------------------------------------------------------------


def _fmt(c: float) -> str:
    return repr(float(c))


def _wrap(head: str, terms: list, tail: str = "") -> list:
    lines, cur = [], head
    for t in terms + ([tail] if tail else []):
        if len(cur) + 1 + len(t) > 78 and cur.strip():
            lines.append(cur)
            cur = "   " + t
        else:
            cur = f"{cur} {t}" if cur else t
    lines.append(cur)
    return lines


def _terms(coeffs: dict, order: dict) -> list:
    out = []
    for name in sorted(coeffs, key=order.__getitem__):
        c = coeffs[name]
        if c == 0.0:
            continue
        sign = "-" if c < 0 else "+"
        out.append(f"{sign} {_fmt(abs(c))} {name}")
    if not out:
        out.append(f"+ 0.0 {next(iter(sorted(order, key=order.__getitem__)))}")
    return out


def lp_text(model: PwlaModel) -> str:
    order = model.column()
    lines = [
        f"\\ qsg pwla model: n={model.n_centers} K={model.pieces} delta0={_fmt(model.delta0)} form={model.objective_form}",
        "Maximize",
    ]
    lines += _wrap(" obj:", _terms(model.objective, order))
    lines.append("Subject To")
    for row in model.rows:
        lines += _wrap(f" {row.name}:", _terms(row.coeffs, order), f"{row.sense} {_fmt(row.rhs)}")
    lines.append("Bounds")
    for name in model.variables:
        if name not in model.binaries:
            lines.append(f" 0 <= {name} <= {_fmt(model.upper[name])}")
    lines.append("Binaries")
    bins = [v for v in model.variables if v in model.binaries]
    lines += _wrap("", bins)
    lines.append("End")
    return "\n".join(lines) + "\n"


def export_lp(model: PwlaModel, path) -> Path:
    path = Path(path)
    path.write_text(lp_text(model))
    return path


@dataclass
class LpProblem:
    """Generic content of a parsed LP file."""

    sense: str
    objective: dict
    rows: list
    bounds: dict  # name -> (lo, hi)
    binaries: set
    variables: list


_TERM = re.compile(r"([+-])\s*([0-9.eE+-]+|inf)?\s*([A-Za-z_][A-Za-z0-9_]*)")


def _parse_expr(text: str, seen: list, known: set) -> dict:
    coeffs = {}
    text = text.strip()
    if text and text[0] not in "+-":
        text = "+ " + text
    pos = 0
    for m in _TERM.finditer(text):
        if text[pos : m.start()].strip():
            raise SolverOutputError(f"cannot parse LP expression near {text[pos:m.start()]!r}")
        sign = -1.0 if m.group(1) == "-" else 1.0
        coef = float(m.group(2)) if m.group(2) else 1.0
        name = m.group(3)
        coeffs[name] = coeffs.get(name, 0.0) + sign * coef
        if name not in known:
            known.add(name)
            seen.append(name)
        pos = m.end()
    if text[pos:].strip():
        raise SolverOutputError(f"trailing text in LP expression: {text[pos:]!r}")
    return coeffs


def read_lp(path) -> LpProblem:
    """Parse the subset of the LP format produced by :func:`export_lp`."""
    sections = {"maximize": "obj", "maximise": "obj", "minimize": "obj", "minimise": "obj",
                "subject to": "rows", "st": "rows", "s.t.": "rows", "bounds": "bounds",
                "binaries": "bin", "binary": "bin", "end": "end"}
    sense, section = "max", None
    statements: dict = {"obj": [], "rows": [], "bounds": [], "bin": []}
    lines = Path(path).read_text().splitlines()
    buf = None
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("\\", 1)[0].rstrip()
        if not line.strip():
            continue
        key = line.strip().lower()
        if key in sections:
            if buf is not None:
                statements[section].append(buf)
                buf = None
            section = sections[key]
            if key.startswith("min"):
                sense = "min"
            if section == "end":
                break
            continue
        if section is None:
            raise SolverOutputError(f"{path}:{lineno}: content before any section")
        if section in ("obj", "rows"):
            if buf is None or re.match(r"^\s*[A-Za-z_][\w.]*\s*:", line):
                if buf is not None:
                    statements[section].append(buf)
                buf = (lineno, line.strip())
            else:
                buf = (buf[0], buf[1] + " " + line.strip())
        else:
            statements[section].append((lineno, line.strip()))
    if buf is not None:
        statements[section].append(buf)

    seen, known = [], set()
    objective = {}
    for lineno, text in statements["obj"]:
        label, _, expr = text.partition(":") if ":" in text else ("obj", "", text)
        objective.update(_parse_expr(expr, seen, known))
    rows = []
    for lineno, text in statements["rows"]:
        label, sep, body = text.partition(":")
        if not sep:
            raise SolverOutputError(f"{path}:{lineno}: unnamed constraint")
        m = re.match(r"^(.*?)(<=|>=|=<|=>|=)\s*(\S+)\s*$", body)
        if not m:
            raise SolverOutputError(f"{path}:{lineno}: constraint {label.strip()!r} has no relation")
        sense_txt = {"=<": "<=", "=>": ">="}.get(m.group(2), m.group(2))
        rows.append(Row(label.strip(), _parse_expr(m.group(1), seen, known), sense_txt, float(m.group(3))))
    bounds = {}
    for lineno, text in statements["bounds"]:
        m = re.match(r"^(\S+)\s*<=\s*(\S+)\s*<=\s*(\S+)$", text)
        if not m:
            raise SolverOutputError(f"{path}:{lineno}: unsupported bound {text!r}")
        bounds[m.group(2)] = (float(m.group(1)), float(m.group(3)))
        if m.group(2) not in known:
            known.add(m.group(2))
            seen.append(m.group(2))
    binaries = set()
    for _, text in statements["bin"]:
        for name in text.split():
            binaries.add(name)
            if name not in known:
                known.add(name)
                seen.append(name)
    return LpProblem(sense=sense, objective=objective, rows=rows, bounds=bounds, binaries=binaries, variables=seen)


# --------------------------------------------------------------------------
# solving
# --------------------------------------------------------------------------


@dataclass
class MilpSolution:
    values: dict
    objective: float
    status: str
    strategy: Strategy | None = None
    solve_time: float = 0.0
    log: str = ""

    @property
    def theta(self):
        return {k: v for k, v in self.values.items() if k.startswith("t_")}

    @property
    def r(self):
        return {k: v for k, v in self.values.items() if k.startswith("r_")}

    @property
    def z(self):
        return {k: v for k, v in self.values.items() if k.startswith("z_")}


def solve_lp_problem(problem: LpProblem, time_limit: float | None = None, mip_rel_gap: float = 1e-9):
    """Solve a parsed LP problem with HiGHS; returns (status, values, objective)."""
    names = problem.variables
    col = {v: i for i, v in enumerate(names)}
    nv = len(names)
    c = np.zeros(nv)
    for v, a in problem.objective.items():
        c[col[v]] = a
    if problem.sense == "max":
        c = -c
    data, ri, ci, lo, hi = [], [], [], [], []
    for i, row in enumerate(problem.rows):
        for v, a in row.coeffs.items():
            data.append(a)
            ri.append(i)
            ci.append(col[v])
        lo.append(row.rhs if row.sense in (">=", "=") else -np.inf)
        hi.append(row.rhs if row.sense in ("<=", "=") else np.inf)
    lb = np.zeros(nv)
    ub = np.full(nv, np.inf)
    for v, (a, b) in problem.bounds.items():
        lb[col[v]], ub[col[v]] = a, b
    integrality = np.zeros(nv)
    for v in problem.binaries:
        integrality[col[v]] = 1
        lb[col[v]], ub[col[v]] = max(lb[col[v]], 0.0), min(ub[col[v]], 1.0)
    constraints = []
    if problem.rows:
        A = coo_matrix((data, (ri, ci)), shape=(len(problem.rows), nv)).tocsr()
        constraints.append(LinearConstraint(A, lo, hi))
    options = {"mip_rel_gap": mip_rel_gap, "disp": False}
    if time_limit is not None:
        options["time_limit"] = float(time_limit)
    res = milp(c, constraints=constraints, integrality=integrality, bounds=Bounds(lb, ub), options=options)
    if res.status == 2:
        return "infeasible", {}, math.nan
    if res.x is None:
        status = "timeout" if res.status == 1 else "error"
        return status, {}, math.nan
    values = {v: float(res.x[i]) for i, v in enumerate(names)}
    obj = float(-res.fun if problem.sense == "max" else res.fun)
    return ("optimal" if res.status == 0 else "feasible"), values, obj


def _model_problem(model: PwlaModel) -> LpProblem:
    bounds = {v: (0.0, model.upper[v]) for v in model.variables if v not in model.binaries}
    return LpProblem("max", dict(model.objective), model.rows, bounds, set(model.binaries), list(model.variables))


def _snap(model: PwlaModel, values: dict) -> dict:
    # round binaries and clip increments into their boxes
    out = {}
    for v in model.variables:
        x = values.get(v, 0.0)
        out[v] = float(round(x)) if v in model.binaries else min(max(x, 0.0), model.upper[v])
    return out


def solve_builtin(model: PwlaModel, time_limit: float | None = None) -> MilpSolution:
    start = time.perf_counter()
    status, values, obj = solve_lp_problem(_model_problem(model), time_limit)
    elapsed = time.perf_counter() - start
    if status == "infeasible":
        raise InfeasibleError("PWLA model is infeasible")
    if status == "timeout":
        raise SolverTimeoutError("HiGHS hit its time limit without a solution", log=f"elapsed {elapsed:.2f}s")
    if status == "error":
        raise SolverOutputError("HiGHS stopped without a solution")
    values = _snap(model, values)
    problems = check_assignment(model, values)
    if problems:
        raise SolverOutputError("HiGHS solution violates the model: " + "; ".join(problems[:5]))
    return MilpSolution(values, objective_value(model, values), status, decode(model, values), elapsed)


def resolve_solver(solver_command: str | None) -> str | None:
    return solver_command or os.environ.get(SOLVER_ENV) or None


def parse_solution_file(path, model: PwlaModel):
    """Read ``name value`` lines; ``status`` and ``objective`` are reserved names."""
    status, objective, values = "optimal", None, {}
    known = set(model.variables)
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise SolverOutputError(f"{path}:{lineno}: expected 'name value', got {line!r}")
        name, value = parts
        if name == "status":
            status = value.lower()
            continue
        try:
            num = float(value)
        except ValueError:
            raise SolverOutputError(f"{path}:{lineno}: value {value!r} is not a number") from None
        if name == "objective":
            objective = num
        elif name in known:
            values[name] = num
        else:
            raise SolverOutputError(f"{path}:{lineno}: unknown variable {name!r}")
    return status, objective, values


def solve_external(model: PwlaModel, solver_command: str | None = None, timeout: float = 600.0) -> MilpSolution:
    """Run ``<solver_command> model.lp solution.out`` and validate its answer."""
    command = resolve_solver(solver_command)
    if not command:
        raise SolverConfigError(f"no MILP solver configured; pass --solver-cmd or set {SOLVER_ENV}")
    if timeout is not None and timeout <= 0:
        raise SolverTimeoutError("timeout of 0 seconds leaves no time to solve", log="")
    argv = shlex.split(command)
    exe = shutil.which(argv[0]) or (argv[0] if os.access(argv[0], os.X_OK) else None)
    if exe is None:
        raise SolverConfigError(f"solver executable {argv[0]!r} not found or not executable")
    with tempfile.TemporaryDirectory(prefix="qsg-milp-") as tmp:
        lp_path = Path(tmp) / "model.lp"
        sol_path = Path(tmp) / "solution.out"
        export_lp(model, lp_path)
        start = time.perf_counter()
        try:
            proc = subprocess.run(argv + [str(lp_path), str(sol_path)], capture_output=True, text=True, timeout=timeout)
        except subprocess.TimeoutExpired as exc:
            partial = (exc.stdout or "") + (exc.stderr or "")
            if isinstance(partial, bytes):
                partial = partial.decode(errors="replace")
            raise SolverTimeoutError(f"solver exceeded {timeout} s", log=partial) from None
        elapsed = time.perf_counter() - start
        log = proc.stdout + proc.stderr
        if not sol_path.exists():
            raise SolverOutputError(f"solver exited with code {proc.returncode} and wrote no solution file:\n{log}")
        status, _, values = parse_solution_file(sol_path, model)
    if status == "infeasible":
        raise InfeasibleError("external solver reports the model infeasible")
    if status not in ("optimal", "feasible"):
        raise SolverOutputError(f"external solver status {status!r}")
    problems = check_assignment(model, values)
    if problems:
        raise SolverOutputError("solution violates the model: " + "; ".join(problems[:5]))
    values = _snap(model, values)
    return MilpSolution(values, objective_value(model, values), status, decode(model, values), elapsed, log)


def solve_pwla(model: PwlaModel, solver_command: str | None = None, timeout: float = 600.0) -> MilpSolution:
    command = resolve_solver(solver_command)
    if command is None:
        raise SolverConfigError(
            f"no MILP solver configured; pass --solver-cmd {BUILTIN_SOLVER} (bundled HiGHS) or an executable, "
            f"or set {SOLVER_ENV}"
        )
    if command == BUILTIN_SOLVER:
        return solve_builtin(model, time_limit=timeout)
    return solve_external(model, command, timeout)


# --------------------------------------------------------------------------
# exact small-instance path
# --------------------------------------------------------------------------


def solve_small_exact(inst: GameInstance, delta0: float, xi: float = 1e-9, bound_dual=None):
    """Exact ``max B`` over feasible subsets by enumeration plus fixed-subset dual solves.

    Subsets are visited in order of a Lagrangian upper bound (any nonnegative
    dual gives one, ``bound_dual`` defaults to zero) and skipped once the bound
    cannot beat the incumbent.
    """
    from .dualheur import DualPoint, _Problem, pgd_solve_fixed_subset

    n = inst.n_centers
    if n > SMALL_EXACT_MAX_CENTERS:
        raise SizeError(f"exact enumeration supports n <= {SMALL_EXACT_MAX_CENTERS}, got n={n}; use the MILP path")
    dual = bound_dual if bound_dual is not None else DualPoint.zero(inst.n_partitions)
    prob = _Problem(inst, np.arange(n), delta0, select=False)
    h, _ = prob.scores(dual.vector())
    base = dual.nu * inst.m + float(dual.mu @ inst.beta)
    parts = inst.part_of
    candidates = []
    for size in range(inst.min_NP, inst.cap_C + 1):
        for subset in combinations(range(n), size):
            if len(set(parts[list(subset)].tolist())) == inst.n_partitions:
                candidates.append((float(h[list(subset)].sum()) + base, subset))
    if not candidates:
        raise InfeasibleError("instance has no feasible subset")
    candidates.sort(key=lambda c: -c[0])
    best, best_v, solved = None, -math.inf, 0
    for ub, subset in candidates:
        if ub <= best_v:
            break
        strategy, value, _ = pgd_solve_fixed_subset(inst, subset, delta0, xi)
        solved += 1
        if value > best_v:
            best, best_v = strategy, value
    return best, best_v
