import numpy as np
import pytest

from ecotone.grid import make_grid
from ecotone.nonlinearity import bistable_cubic, monotone_cubic


@pytest.fixture(scope="session")
def line():
    return make_grid(1, 1.0, 101)


@pytest.fixture(scope="session")
def rect():
    return make_grid(2, (1.0, 2.0), (11, 21))


@pytest.fixture(scope="session")
def mono():
    return monotone_cubic()


@pytest.fixture(scope="session")
def bist():
    return bistable_cubic()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_CRITERIA = []


@pytest.fixture
def criterion():
    """Record one acceptance line: ``criterion(id, passed, detail, seconds)``."""

    def record(cid, passed, detail, seconds=None):
        t = "" if seconds is None else f" [{seconds:.2f}s]"
        line = f"criterion {cid}: {'PASS' if passed else 'FAIL'} {detail}{t}"
        _CRITERIA.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
