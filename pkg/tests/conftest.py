import numpy as np
import pytest

from kinspde.grid import make_grid


@pytest.fixture
def grid():
    return make_grid(8.0, 6.0, 64, 64)


@pytest.fixture
def wide_grid():
    """Box wide enough that unit-width bumps stay clear of the edges up to t = 1."""
    return make_grid(24.0, 12.0, 256, 256)


@pytest.fixture
def bump(grid):
    X, V = grid.mesh
    return np.exp(-X**2 - V**2)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance_log(request):
    return request.config.stash.setdefault(_ACCEPTANCE, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
