import numpy as np
import pytest

from hsl.groundstate import default_ground_state
from hsl.linops import build_corrections


@pytest.fixture(scope="session")
def gs():
    return default_ground_state()


@pytest.fixture(scope="session")
def corrections(gs):
    return build_corrections(gs)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_lines():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
