import numpy as np
import pytest

from inls.grid import RadialField, make_grid
from inls.ground_state import solve_free_q, solve_q_with_potential
from inls.potentials import Potential

ZERO = Potential("zero")


@pytest.fixture(scope="session")
def grid():
    return make_grid(32.0, 4096)


@pytest.fixture(scope="session")
def fine_grid():
    return make_grid(32.0, 8192)


@pytest.fixture(scope="session")
def q_half(grid):
    return solve_free_q(0.5, grid)


@pytest.fixture(scope="session")
def q_half_fine(fine_grid):
    return solve_free_q(0.5, fine_grid)


@pytest.fixture(scope="session")
def well_ground(grid):
    return solve_q_with_potential(Potential("gaussian_well", 0.5), 0.5, grid)


def gaussian(grid, amp=1.0, width=1.0, chirp=0.0):
    return RadialField.from_function(
        grid, lambda r: amp * np.exp(-(r / width) ** 2) * np.exp(1j * chirp * r * r))


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance
    if test_acceptance.LINES:
        terminalreporter.section("acceptance")
        for key in sorted(test_acceptance.LINES, key=lambda k: (int(k[3:].split("[")[0]), k)):
            terminalreporter.write_line(test_acceptance.LINES[key])
