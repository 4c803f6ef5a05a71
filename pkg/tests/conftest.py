import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from emwf import make_grid

settings.register_profile("default", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def grid1():
    return make_grid(1, 20.0, 256)


@pytest.fixture
def grid2():
    return make_grid(2, 16.0, 64)


def gauss_hermite(n=80):
    """Nodes/weights for ∫ f(x) exp(-x^2) dx."""
    return np.polynomial.hermite.hermgauss(n)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
