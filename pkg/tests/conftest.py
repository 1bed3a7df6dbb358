import pytest

from udog_pulses.closure import solve_xi
from udog_pulses.schemes import build_geometric
from udog_pulses.targets import NAMED_GATES


@pytest.fixture(scope="session")
def level5_s_solution():
    return solve_xi(NAMED_GATES["S"], 5)


@pytest.fixture(scope="session")
def level5_s_sequence(level5_s_solution):
    return build_geometric(NAMED_GATES["S"], level5_s_solution.level_spec)
