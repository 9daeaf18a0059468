"""Indoor floor plan as an occupancy grid, UAV pose, and straight-line motion.

Map text format::

    <width_cells> <height_cells> <cell_size_m>
    <height_cells rows of width_cells characters, top (max-y) row first>

with ``#`` wall, ``.`` free, ``U`` UAV start, ``S`` RF source (both free).
Everything outside the grid is wall.

Cell ``(ix, iy)`` covers ``[ix*c, (ix+1)*c] x [iy*c, (iy+1)*c]`` metres with
``iy = 0`` at the bottom.  Actions are headings ``k * 45 deg``
counter-clockwise from +x.
"""

import math
from dataclasses import dataclass, field
from importlib import resources
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from . import kernels

NUM_ACTIONS = 8

_S = math.sqrt(0.5)
# exact unit vectors so axis-aligned moves stay on the aisle line
HEADINGS = (
    (1.0, 0.0), (_S, _S), (0.0, 1.0), (-_S, _S),
    (-1.0, 0.0), (-_S, -_S), (0.0, -1.0), (_S, -_S),
)

DEFAULT_MAP_NAME = "corridor.map"
# how close the UAV stops short of a wall when a move is cut short
STOP_CLEARANCE_M = 0.1


class MapError(ValueError):
    """Malformed or invalid map; ``line``/``column`` are 1-based (0 = not applicable)."""

    def __init__(self, message, line=0, column=0):
        self.line = line
        self.column = column
        where = f"line {line}" + (f", column {column}" if column else "") if line else "map"
        super().__init__(f"{where}: {message}")


class Pose(NamedTuple):
    x_m: float
    y_m: float


def heading_rad(action):
    return action * math.pi / 4.0


def distance(a, b):
    return math.hypot(a[0] - b[0], a[1] - b[1])


@dataclass(frozen=True, eq=False)
class OccupancyMap:
    width_cells: int
    height_cells: int
    cell_size_m: float
    wall: np.ndarray = field(repr=False)  # uint8 [iy, ix], iy = 0 at the bottom
    source_xy: Pose
    start_xy: Pose
    name: str = ""

    @property
    def extent_m(self):
        return (self.width_cells * self.cell_size_m, self.height_cells * self.cell_size_m)

    def cell_of(self, x, y):
        return int(math.floor(x / self.cell_size_m)), int(math.floor(y / self.cell_size_m))

    def is_free_point(self, x, y):
        ix, iy = self.cell_of(x, y)
        if not (0 <= ix < self.width_cells and 0 <= iy < self.height_cells):
            return False
        return not self.wall[iy, ix]

    def to_text(self):
        rows = [f"{self.width_cells} {self.height_cells} {self.cell_size_m!r}"]
        su = {self.cell_of(*self.source_xy): "S", self.cell_of(*self.start_xy): "U"}
        for iy in range(self.height_cells - 1, -1, -1):
            rows.append("".join(
                su.get((ix, iy), "#" if self.wall[iy, ix] else ".") for ix in range(self.width_cells)
            ))
        return "\n".join(rows) + "\n"


def parse_map(text, name=""):
    """Parse and validate a map (``str`` or ``bytes``); raises :class:`MapError`."""
    if isinstance(text, (bytes, bytearray)):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MapError(f"not UTF-8 text ({exc.reason})") from None
    lines = text.splitlines()
    if not lines:
        raise MapError("empty input", 1)
    header = lines[0].split()
    if len(header) != 3:
        raise MapError("header must be '<width_cells> <height_cells> <cell_size_m>'", 1)
    try:
        width, height = int(header[0]), int(header[1])
        cell = float(header[2])
    except ValueError:
        raise MapError("header must be '<width_cells> <height_cells> <cell_size_m>'", 1) from None
    if width <= 0 or height <= 0:
        raise MapError("width and height must be positive", 1)
    if not (math.isfinite(cell) and cell > 0):
        raise MapError("cell size must be positive", 1)

    rows = lines[1:]
    while len(rows) > height and not rows[-1].strip():
        rows.pop()
    if len(rows) != height:
        raise MapError(f"expected {height} grid rows, found {len(rows)}", min(len(lines), height + 1) + 1)

    wall = np.zeros((height, width), dtype=np.uint8)
    marks = {"S": [], "U": []}
    for r, row in enumerate(rows):
        lineno = r + 2
        if len(row) != width:
            raise MapError(f"row has {len(row)} cells, expected {width}", lineno, min(len(row), width) + 1)
        iy = height - 1 - r
        for ix, ch in enumerate(row):
            if ch == "#":
                wall[iy, ix] = 1
            elif ch in marks:
                marks[ch].append((lineno, ix + 1, ix, iy))
            elif ch != ".":
                raise MapError(f"unexpected character {ch!r}", lineno, ix + 1)

    points = {}
    for mark, label in (("U", "start"), ("S", "source")):
        found = marks[mark]
        if not found:
            raise MapError(f"missing '{mark}' ({label}) marker")
        if len(found) > 1:
            lineno, col = found[1][:2]
            raise MapError(f"duplicate '{mark}' ({label}) marker", lineno, col)
        points[mark] = found[0]

    wall.setflags(write=False)
    start, source = points["U"], points["S"]
    m = OccupancyMap(
        width_cells=width,
        height_cells=height,
        cell_size_m=cell,
        wall=wall,
        source_xy=Pose((source[2] + 0.5) * cell, (source[3] + 0.5) * cell),
        start_xy=Pose((start[2] + 0.5) * cell, (start[3] + 0.5) * cell),
        name=name,
    )
    _check_connected(m, start, source)
    return m


def _check_connected(m, start, source):
    labels, _ = ndimage.label(m.wall == 0)  # default structure is 4-connected
    if labels[start[3], start[2]] != labels[source[3], source[2]]:
        raise MapError("start 'U' cannot reach source 'S' through free cells", source[0], source[1])


def load_map(path):
    with open(path, "rb") as fh:
        return parse_map(fh.read(), name=str(path))


def load_default_map():
    text = resources.files("rfnav").joinpath("maps", DEFAULT_MAP_NAME).read_bytes()
    return parse_map(text, name=DEFAULT_MAP_NAME)


def is_segment_free(occ, p0, p1, backend=None):
    """True iff the closed segment touches no wall cell (supercover test).

    Cells merely touched at an edge or corner count; leaving the grid fails.
    """
    k = kernels.resolve(backend)
    c = occ.cell_size_m
    return bool(k.segment_free(occ.wall, p0[0] / c, p0[1] / c, p1[0] / c, p1[1] / c))


def apply_action(occ, pose, action, distance_m, backend=None):
    """Move ``distance_m`` along ``action``'s heading; ``None`` if blocked.

    There is no partial movement: a blocked move leaves the UAV where it was.
    """
    if distance_m < 0:
        raise ValueError(f"distance must be >= 0, got {distance_m}")
    hx, hy = HEADINGS[action]
    candidate = Pose(pose[0] + distance_m * hx, pose[1] + distance_m * hy)
    if is_segment_free(occ, pose, candidate, backend):
        return candidate
    return None


class Advance(NamedTuple):
    pose: Pose
    travelled_m: float


def advance(occ, pose, action, distance_m, clearance_m=STOP_CLEARANCE_M, backend=None):
    """Fly up to ``distance_m`` along ``action``, stopping ``clearance_m`` short of a wall.

    Returns :class:`Advance` with the stop pose and the distance flown, or
    ``None`` when the wall ahead leaves less than ``clearance_m`` of room.
    A free full-length path is always flown in full.
    """
    if distance_m < 0:
        raise ValueError(f"distance must be >= 0, got {distance_m}")
    if not clearance_m > 0:
        raise ValueError(f"clearance must be > 0, got {clearance_m}")
    k = kernels.resolve(backend)
    c = occ.cell_size_m
    hx, hy = HEADINGS[action]
    x1, y1 = pose[0] + distance_m * hx, pose[1] + distance_m * hy
    t = k.first_contact(occ.wall, pose[0] / c, pose[1] / c, x1 / c, y1 / c)
    if t == math.inf:
        return Advance(Pose(x1, y1), float(distance_m))
    room = t * distance_m - clearance_m
    if room < clearance_m:
        return None
    return Advance(Pose(pose[0] + room * hx, pose[1] + room * hy), room)


def corridor_map_text(cell_size_m=0.5, width_m=75.0, height_m=120.0, aisle_m=2.0, period_m=8.0):
    """The bundled synthetic floor: square room blocks separated by 2 m aisles.

    A one-cell wall ring encloses a lattice of aisles every ``period_m`` along
    both axes, starting at the bottom-left.  Leftover height at the top is
    closed by one more aisle along the top wall.  ``U`` and ``S`` sit in the
    bottom-left and top-right free corner cells.
    """
    w = int(round(width_m / cell_size_m))
    h = int(round(height_m / cell_size_m))
    aisle = int(round(aisle_m / cell_size_m))
    period = int(round(period_m / cell_size_m))
    wall = np.ones((h, w), dtype=bool)

    def aisle_mask(n):
        inner = np.arange(n - 2)
        mask = np.zeros(n, dtype=bool)
        mask[1:-1] = (inner % period) < aisle
        mask[n - 1 - aisle:n - 1] = True  # aisle along the far wall
        return mask

    ax, ay = aisle_mask(w), aisle_mask(h)
    wall[np.ix_(ay, np.ones(w, dtype=bool))] = False
    wall[np.ix_(np.ones(h, dtype=bool), ax)] = False
    wall[0, :] = wall[-1, :] = True
    wall[:, 0] = wall[:, -1] = True

    grid = np.where(wall, "#", ".").astype("<U1")
    grid[1, 1] = "U"
    grid[h - 2, w - 2] = "S"
    rows = ["".join(grid[iy]) for iy in range(h - 1, -1, -1)]
    return f"{w} {h} {cell_size_m!r}\n" + "\n".join(rows) + "\n"
