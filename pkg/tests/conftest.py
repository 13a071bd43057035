import numpy as np
import pytest

from spinstar.model import make_params


@pytest.fixture
def rng():
    return np.random.default_rng(8675309)


def random_params(rng, n_min=1, n_max=10, delta_range=2.0):
    n = int(rng.integers(n_min, n_max + 1))
    alphas = rng.uniform(0.1, 1.0, n)
    delta = rng.uniform(-delta_range, delta_range)
    omega0 = rng.uniform(-1.0, 1.0)
    return make_params(n, alphas, omega0 + delta, omega0)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
