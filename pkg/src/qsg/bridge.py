"""Reference external-solver command: ``qsg-milp-bridge model.lp solution.out``.

Reads an LP file, solves it with HiGHS and writes the solution protocol
expected by :func:`qsg.milp.solve_external`::

    status optimal
    objective 12.5
    t_0 1
    r_0_1 0.05
    ...
"""

from __future__ import annotations

import sys
from pathlib import Path

from .milp import read_lp, solve_lp_problem


def main(argv=None) -> int:
    args = sys.argv[1:] if argv is None else argv
    if len(args) != 2:
        print("usage: qsg-milp-bridge MODEL.lp SOLUTION.out", file=sys.stderr)
        return 2
    problem = read_lp(args[0])
    status, values, objective = solve_lp_problem(problem)
    lines = [f"status {status}"]
    if values:
        lines.append(f"objective {objective!r}")
        lines += [f"{name} {value!r}" for name, value in values.items()]
    Path(args[1]).write_text("\n".join(lines) + "\n")
    print(f"{status} {objective}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
