import sys
import numpy as np
import pytest

from cknlab.energy import minimize
from cknlab.limit import ScheduleParams
from cknlab.quadrature import GridFunction, QuadratureConfig, geometric_nodes


@pytest.fixture(scope="session")
def cfg():
    return QuadratureConfig()


@pytest.fixture(scope="session")
def nodes16():
    return geometric_nodes(1e-6, 1e6, 16)


def cubic_bump(center, width):
    """``(1 - z^2)^3`` on ``|z| < 1`` with ``z = (x - center)/width``."""
    def f(x):
        z = (np.asarray(x, dtype=float) - center) / width
        return np.where(np.abs(z) < 1.0, (1.0 - z * z) ** 3, 0.0)
    return f


def grid_bump(nodes, center, width, height=1.0):
    return GridFunction.from_function(lambda x: height * cubic_bump(center, width)(x), nodes)


_MINIMIZERS = {}


def schedule_minimizer(epsilon, b=0.0):
    """Session cache: the ladder tests, the energy tests and the acceptance suite share solves."""
    key = (b, epsilon)
    if key not in _MINIMIZERS:
        sched = ScheduleParams(b, epsilon)
        _MINIMIZERS[key] = (sched, minimize(sched.params))
    return _MINIMIZERS[key]


@pytest.fixture(scope="session")
def rung02():
    return schedule_minimizer(0.2)


@pytest.fixture(scope="session")
def rung01():
    return schedule_minimizer(0.1)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for i in sorted(results):
            terminalreporter.write_line(results[i])
