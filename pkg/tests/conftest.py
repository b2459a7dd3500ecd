import numpy as np
import pytest

from loopmorse.lie import su

ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def su2():
    return su(2)


@pytest.fixture(scope="session")
def su3():
    return su(3)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
