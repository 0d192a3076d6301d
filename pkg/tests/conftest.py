import numpy as np
import pytest

from depmix import Dataset


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def linear_data():
    """A single noisy straight line, y = 1 + 2x + N(0, 0.3^2)."""
    g = np.random.default_rng(7)
    x = g.uniform(-2, 2, 120)
    return Dataset(1.0 + 2.0 * x + 0.3 * g.standard_normal(120), x[:, None])


@pytest.fixture
def two_regime_data():
    """Two x-separated groups with different intercepts."""
    g = np.random.default_rng(11)
    x = np.r_[g.uniform(-3, -1, 80), g.uniform(1, 3, 80)]
    y = np.where(x < 0, -2.0, 2.0) + 0.1 * g.standard_normal(160)
    return Dataset(y, x[:, None])


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance criterion lines at the end of the run."""
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
