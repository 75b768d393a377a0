import numpy as np
import pytest

from qsg.model import GameInstance, equal_partitions, generate_instance


def make_instance(reward_def, loss_def, reward_att, loss_att, lam=0.76, m=1.0, cap_C=None, min_NP=1,
                  n_partitions=1, beta=None):
    n = len(reward_def)
    return GameInstance(
        reward_def=np.asarray(reward_def, dtype=float),
        loss_def=np.asarray(loss_def, dtype=float),
        reward_att=np.asarray(reward_att, dtype=float),
        loss_att=np.asarray(loss_att, dtype=float),
        lam=lam,
        m=m,
        cap_C=n if cap_C is None else cap_C,
        min_NP=min_NP,
        partitions=equal_partitions(n, n_partitions),
        beta=np.full(n_partitions, m if beta is None else beta, dtype=float),
    )


@pytest.fixture
def inst20():
    return generate_instance(1, 20)


@pytest.fixture
def inst6():
    return generate_instance(3, 6, {"n_partitions": 2})


ACCEPTANCE_LINES = []


@pytest.fixture
def report_line():
    """Record one PASS/FAIL line for the end-of-run summary."""

    def emit(criterion, passed, detail):
        line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
