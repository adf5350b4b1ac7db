import pytest

from noisy_extremes import grid
from noisy_extremes.dynamics import doubling, quadratic
from noisy_extremes.noise import NoiseSpec


@pytest.fixture(scope="session")
def doubling_setup():
    spec, noise = doubling(2), NoiseSpec(0.25, "wrap")
    K = grid.discretize(spec, noise, 512)
    return spec, noise, K, grid.stationary(K)


@pytest.fixture(scope="session")
def doubling_small():
    spec, noise = doubling(2), NoiseSpec(0.25, "wrap")
    K = grid.discretize(spec, noise, 256)
    return spec, noise, K, grid.stationary(K)


@pytest.fixture(scope="session")
def quadratic_setup():
    spec, noise = quadratic(2.0), NoiseSpec(0.1, "reflect")
    K = grid.discretize(spec, noise, 512)
    return spec, noise, K, grid.stationary(K)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
