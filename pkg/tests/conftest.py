import warnings

import numpy as np
import pytest

from flexgt.graph import build_topology, metropolis_weights
from flexgt.problems import make_ridge


@pytest.fixture(autouse=True)
def _quiet_bound_warnings():
    # make_operator warns when the accelerated closed-form bound is exceeded
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        yield


@pytest.fixture
def exp5():
    return metropolis_weights(build_topology("exponential", 20, 5))


@pytest.fixture
def ring20():
    return metropolis_weights(build_topology("ring", 20))


@pytest.fixture
def ridge():
    return make_ridge(20, 10, 1.0, 0.0, seed=0)


def rel_err(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.abs(a - b).max() / max(1.0, np.abs(b).max()))


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":").rstrip("ab"))):
            terminalreporter.write_line(line)
