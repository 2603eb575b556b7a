import sys

import numpy as np
import pytest

from delayfrost import DelayModel, GlobalProblem, build_graph, build_weights, integer_shift_quadratics
from delayfrost._accel import HAVE_NUMBA
from delayfrost.graph import DOUBLY

BACKENDS = ["numpy"] + (["numba"] if HAVE_NUMBA else [])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def cycle3():
    return build_weights(build_graph(3, "cycle"))


@pytest.fixture(scope="session")
def cycle3_doubly():
    return build_weights(build_graph(3, "cycle"), DOUBLY)


@pytest.fixture(scope="session")
def s1_weights():
    return build_weights(build_graph(22, "random_strongly_connected", seed=7))


@pytest.fixture(scope="session")
def s1_problem():
    return GlobalProblem(integer_shift_quadratics(22))


@pytest.fixture(scope="session")
def s1_delays():
    return DelayModel.uniform(0, 157, seed=1, coupling="shared")


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance PASS/FAIL lines at the end of the run."""
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "ACCEPTANCE_LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
