import numpy as np
import pytest

from rfnav import kernels
from rfnav.world import load_default_map, parse_map

ACCEPTANCE_LINES = []


def grid_text(rows, cell=0.5):
    """Map text from top-first rows."""
    return f"{len(rows[0])} {len(rows)} {cell}\n" + "\n".join(rows) + "\n"


def open_map(width_cells, height_cells, start, source, cell=0.5, walls=()):
    """Obstacle-free map; ``start``/``source``/``walls`` are (ix, iy) with iy = 0 at the bottom."""
    g = np.full((height_cells, width_cells), ".", dtype="<U1")
    for ix, iy in walls:
        g[iy, ix] = "#"
    g[start[1], start[0]] = "U"
    g[source[1], source[0]] = "S"
    rows = ["".join(g[iy]) for iy in range(height_cells - 1, -1, -1)]
    return parse_map(grid_text(rows, cell), name="fixture")


@pytest.fixture(scope="session")
def default_map():
    return load_default_map()


@pytest.fixture(params=kernels.available())
def backend(request):
    return kernels.get_backend(request.param)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
