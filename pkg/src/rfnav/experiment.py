"""Seeded Monte Carlo sweeps over (T_S, velocity, schedule, epsilon, mode).

Each grid cell runs ``episodes_per_cell`` episodes whose seeds are hashed
from ``(base_seed, cell coordinates, episode index)``, so a sweep is a pure
function of its grid, map and channel settings regardless of worker count.
Statistics are computed over converged episodes only; timeouts are reported
as ``timeout_rate``.
"""

import csv
import hashlib
import io
import math
import struct
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import agent as ag
from . import channel as ch
from . import kernels
from .sim import DEFAULT_TIMEOUT_S, EpisodeConfig, run_episode

BOOTSTRAP_RESAMPLES = 2000
CSV_HEADER = ("T_S_s", "velocity_mps", "schedule", "epsilon", "mode", "n", "n_converged", "mean_s",
              "median_s", "p5_s", "p95_s", "ci95_lo_s", "ci95_hi_s", "timeout_rate")
_LIST_KEYS = ("epochs_s", "velocities_mps", "schedules", "epsilons", "modes", "variants")


@dataclass(frozen=True)
class SweepGrid:
    """Sweep axes.

    ``variants`` optionally lists explicit ``(schedule, mode)`` pairs; when
    given it replaces the ``schedules x modes`` product (the default grid
    compares three variants, not four).
    """

    epochs_s: tuple
    velocities_mps: tuple
    schedules: tuple = (ag.Varying(),)
    epsilons: tuple = (ag.DEFAULT_EPSILON,)
    modes: tuple = (ag.Mode.TEN_STATE,)
    episodes_per_cell: int = 200
    base_seed: int = 0
    variants: Optional[tuple] = None

    def __post_init__(self):
        for name in ("epochs_s", "velocities_mps", "schedules", "epsilons", "modes"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(self, "modes", tuple(ag.Mode(m) for m in self.modes))
        if self.variants is not None:
            object.__setattr__(self, "variants", tuple((s, ag.Mode(m)) for s, m in self.variants))
        self.validate()

    def validate(self):
        for name in ("epochs_s", "velocities_mps", "schedules", "epsilons", "modes"):
            if not getattr(self, name):
                raise ValueError(f"{name} must not be empty")
        if self.variants is not None and not self.variants:
            raise ValueError("variants must not be empty when given")
        for t in self.epochs_s:
            if not (math.isfinite(t) and t > 0):
                raise ValueError(f"epochs_s values must be > 0, got {t}")
        for v in self.velocities_mps:
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"velocities_mps values must be > 0, got {v}")
        for e in self.epsilons:
            if not 0.0 <= e <= 1.0:
                raise ValueError(f"epsilons must be in [0, 1], got {e}")
        for s, _ in self.agent_variants():
            if not isinstance(s, (ag.Fixed, ag.Varying)):
                raise ValueError(f"bad schedule {s!r}")
        if int(self.episodes_per_cell) != self.episodes_per_cell or self.episodes_per_cell < 1:
            raise ValueError(f"episodes_per_cell must be an integer >= 1, got {self.episodes_per_cell}")
        if not 0 <= int(self.base_seed) < 2 ** 64:
            raise ValueError(f"base_seed must fit in 64 bits, got {self.base_seed}")

    def agent_variants(self):
        if self.variants is not None:
            return list(self.variants)
        return [(s, m) for s in self.schedules for m in self.modes]

    def cells(self):
        """Grid coordinates ``(T_S, v, schedule, epsilon, mode)`` in canonical order."""
        out = [(t, v, s, e, m)
               for t in self.epochs_s for v in self.velocities_mps
               for e in self.epsilons for s, m in self.agent_variants()]
        return sorted(set(out), key=_cell_key)

    def echo(self):
        d = {
            "epochs_s": list(self.epochs_s),
            "velocities_mps": list(self.velocities_mps),
            "schedules": [str(s) for s in self.schedules],
            "epsilons": list(self.epsilons),
            "modes": [str(m) for m in self.modes],
            "episodes_per_cell": int(self.episodes_per_cell),
            "base_seed": int(self.base_seed),
        }
        if self.variants is not None:
            d["variants"] = [f"{s}/{m}" for s, m in self.variants]
        return d


def default_grid(episodes_per_cell=200, base_seed=0):
    """The default sweep: 5 T_S x 3 velocities x 3 agent variants, epsilon 0.1."""
    return SweepGrid(
        epochs_s=(0.5, 1.0, 2.0, 4.0, 8.0),
        velocities_mps=(2.0, 5.0, 10.0),
        schedules=(ag.Varying(0.2, 0.9), ag.Fixed(1.0)),
        epsilons=(ag.DEFAULT_EPSILON,),
        modes=(ag.Mode.TEN_STATE, ag.Mode.SINGLE_STATE),
        episodes_per_cell=episodes_per_cell,
        base_seed=base_seed,
        variants=(
            (ag.Varying(0.2, 0.9), ag.Mode.TEN_STATE),
            (ag.Fixed(1.0), ag.Mode.TEN_STATE),
            (ag.Varying(0.2, 0.9), ag.Mode.SINGLE_STATE),
        ),
    )


def _cell_key(cell):
    t, v, s, e, m = cell
    return (float(t), float(v), str(s), float(e), str(m))


def derive_seed(base_seed, cell, tag):
    """64-bit seed from a hash of the base seed, cell coordinates and ``tag``."""
    t, v, s, e, m = cell
    payload = struct.pack("<Q", int(base_seed)) + repr((float(t), float(v), str(s), float(e), str(m), tag)).encode()
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little")


@dataclass(frozen=True)
class CellStats:
    T_S_s: float
    velocity_mps: float
    schedule: object
    epsilon: float
    mode: ag.Mode
    n: int
    n_converged: int
    mean_s: Optional[float]
    median_s: Optional[float]
    p5_s: Optional[float]
    p95_s: Optional[float]
    ci95_lo_s: Optional[float]
    ci95_hi_s: Optional[float]
    timeout_rate: float

    @property
    def coords(self):
        return (self.T_S_s, self.velocity_mps, self.schedule, self.epsilon, self.mode)


@dataclass
class SweepResult:
    grid: dict
    cells: list = field(default_factory=list)
    total_wall_time_s: float = 0.0

    def cell(self, T_S_s, velocity_mps, schedule=None, mode=None, epsilon=None):
        """Look up one cell; unspecified axes must be unambiguous."""
        hits = [c for c in self.cells
                if c.T_S_s == T_S_s and c.velocity_mps == velocity_mps
                and (schedule is None or str(c.schedule) == str(schedule))
                and (mode is None or str(c.mode) == str(mode))
                and (epsilon is None or c.epsilon == epsilon)]
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} cells match T_S={T_S_s}, v={velocity_mps}, {schedule}, {mode}, {epsilon}")
        return hits[0]


def summarize(samples, n_timeouts, seed=0):
    """Core statistics over converged times; a dict of the CellStats stat fields."""
    x = np.asarray(samples, dtype=float)
    n = x.size + int(n_timeouts)
    out = {"n": n, "n_converged": int(x.size), "timeout_rate": (n_timeouts / n) if n else 1.0}
    if x.size == 0:
        out.update(mean_s=None, median_s=None, p5_s=None, p95_s=None, ci95_lo_s=None, ci95_hi_s=None)
        out["timeout_rate"] = 1.0
        return out
    mean = float(x.mean())
    rng = np.random.default_rng(seed)
    boot = x[rng.integers(0, x.size, size=(BOOTSTRAP_RESAMPLES, x.size))].mean(axis=1)
    lo, hi = np.percentile(boot, [2.5, 97.5])
    out.update(
        mean_s=mean,
        median_s=float(np.median(x)),
        p5_s=float(np.percentile(x, 5)),
        p95_s=float(np.percentile(x, 95)),
        ci95_lo_s=min(float(lo), mean),
        ci95_hi_s=max(float(hi), mean),
    )
    return out


def _episode_config(occ, cell, seed, channel, timeout_s):
    t, v, s, e, m = cell
    return EpisodeConfig(
        map=occ, velocity_mps=float(v), epoch_s=float(t), seed=seed,
        agent=ag.AgentConfig(epsilon=float(e), lr_schedule=s, mode=m),
        channel=channel, timeout_s=timeout_s,
    )


def _run_cell(occ, cell, seeds, channel, timeout_s, backend):
    times = []
    timeouts = 0
    for seed in seeds:
        log = run_episode(_episode_config(occ, cell, seed, channel, timeout_s), record_steps=False, backend=backend)
        if log.converged:
            times.append(log.outcome.time_s)
        else:
            timeouts += 1
    return times, timeouts


def run_sweep(grid, occ, channel=None, *, workers=1, timeout_s=DEFAULT_TIMEOUT_S, backend=None):
    """Run every cell of ``grid`` on map ``occ``; results do not depend on ``workers``."""
    grid.validate()
    channel = channel or ch.ChannelParams()
    backend = kernels.backend_name(kernels.resolve(backend))  # by name, so it pickles
    start = time.perf_counter()
    cells = grid.cells()
    plan = []
    seen = set()
    for cell in cells:
        seeds = [derive_seed(grid.base_seed, cell, i) for i in range(int(grid.episodes_per_cell))]
        seen.update(seeds)
        plan.append((cell, seeds))
    if len(seen) != len(cells) * int(grid.episodes_per_cell):
        raise RuntimeError("episode seed collision within sweep")
    for cell, seeds in plan:  # fail fast on construction errors, naming the cell
        try:
            _episode_config(occ, cell, seeds[0], channel, timeout_s).validate()
        except ValueError as exc:
            raise ValueError(f"cell {_describe(cell)}: {exc}") from None

    if workers > 1 and len(plan) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_cell, occ, cell, seeds, channel, timeout_s, backend) for cell, seeds in plan]
            outcomes = [f.result() for f in futures]
    else:
        outcomes = [_run_cell(occ, cell, seeds, channel, timeout_s, backend) for cell, seeds in plan]

    result = SweepResult(grid=grid.echo())
    for (cell, _), (times, timeouts) in zip(plan, outcomes):
        stats = summarize(times, timeouts, seed=derive_seed(grid.base_seed, cell, "bootstrap"))
        t, v, s, e, m = cell
        result.cells.append(CellStats(T_S_s=float(t), velocity_mps=float(v), schedule=s, epsilon=float(e),
                                      mode=ag.Mode(m), **stats))
    result.total_wall_time_s = time.perf_counter() - start
    return result


def _describe(cell):
    t, v, s, e, m = cell
    return f"T_S={t:g} v={v:g} {s} eps={e:g} {m}"


# --- CSV ---------------------------------------------------------------------

def _fmt(x):
    return "NA" if x is None else f"{x:.6g}"


def write_csv(result, sink):
    rows = sorted(result.cells, key=lambda c: _cell_key(c.coords))
    sink.write(",".join(CSV_HEADER) + "\n")
    for c in rows:
        fields = [_fmt(c.T_S_s), _fmt(c.velocity_mps), str(c.schedule), _fmt(c.epsilon), str(c.mode),
                  str(c.n), str(c.n_converged), _fmt(c.mean_s), _fmt(c.median_s), _fmt(c.p5_s),
                  _fmt(c.p95_s), _fmt(c.ci95_lo_s), _fmt(c.ci95_hi_s), _fmt(c.timeout_rate)]
        sink.write(",".join(fields) + "\n")


def read_csv(source):
    """Parse :func:`write_csv` output back into a :class:`SweepResult` (no grid echo)."""
    reader = csv.reader(source)
    header = next(reader, None)
    if header is None or tuple(header) != CSV_HEADER:
        raise ValueError("not a sweep CSV (header mismatch)")
    result = SweepResult(grid={})
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(CSV_HEADER):
            raise ValueError(f"line {lineno}: expected {len(CSV_HEADER)} fields, got {len(row)}")
        try:
            num = [None if v == "NA" else float(v) for v in row[7:]]
            result.cells.append(CellStats(
                T_S_s=float(row[0]), velocity_mps=float(row[1]), schedule=ag.parse_schedule(row[2]),
                epsilon=float(row[3]), mode=ag.parse_mode(row[4]), n=int(row[5]), n_converged=int(row[6]),
                mean_s=num[0], median_s=num[1], p5_s=num[2], p95_s=num[3], ci95_lo_s=num[4], ci95_hi_s=num[5],
                timeout_rate=num[6],
            ))
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    return result


# --- SVG ---------------------------------------------------------------------

_PANEL_W, _PANEL_H = 360, 280
_MARGIN = dict(left=64, right=16, top=36, bottom=48)
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


def _r6(x):
    # plot from CSV-precision numbers so CSV re-renders match the direct plot
    return None if x is None else float(f"{x:.6g}")


def _nice_ceiling(x):
    if x <= 0:
        return 1.0
    mag = 10.0 ** math.floor(math.log10(x))
    for m in (1, 2, 2.5, 5, 10):
        if m * mag >= x:
            return m * mag
    return 10 * mag


def _esc(text):
    return str(text).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def emit_plot(result, sink):
    """One panel per (schedule, mode[, epsilon]); mean time vs T_S, one line per velocity."""
    cells = sorted(result.cells, key=lambda c: _cell_key(c.coords))
    epochs = sorted({_r6(c.T_S_s) for c in cells})
    if len(epochs) < 2:
        raise ValueError("plot needs at least 2 T_S values; use the CSV output for this grid")
    velocities = sorted({_r6(c.velocity_mps) for c in cells})
    eps_values = sorted({_r6(c.epsilon) for c in cells})
    panels = []
    for c in cells:
        key = (str(c.schedule), str(c.mode), _r6(c.epsilon))
        if key not in panels:
            panels.append(key)
    # keep the variants in a stable, readable order: ten-state first
    panels.sort(key=lambda k: (k[1] != "tenstate", k[0], k[2]))

    ys = [_r6(v) for c in cells for v in (c.ci95_hi_s, c.mean_s) if v is not None]
    y_max = _nice_ceiling(max(ys) if ys else 1.0)
    lx0, lx1 = math.log2(epochs[0]), math.log2(epochs[-1])
    pw = _PANEL_W - _MARGIN["left"] - _MARGIN["right"]
    ph = _PANEL_H - _MARGIN["top"] - _MARGIN["bottom"]
    width = _PANEL_W * len(panels)
    height = _PANEL_H + 24 + 16 * len(velocities)

    def px(t):
        return _MARGIN["left"] + pw * (math.log2(t) - lx0) / (lx1 - lx0)

    def py(y):
        return _MARGIN["top"] + ph * (1.0 - y / y_max)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>']
    for p, (sched, mode, eps) in enumerate(panels):
        ox = p * _PANEL_W
        title = f"{sched} / {mode}" + (f" / eps={eps:g}" if len(eps_values) > 1 else "")
        out.append(f'<g transform="translate({ox},0)">')
        out.append(f'<text x="{_PANEL_W / 2:.1f}" y="20" text-anchor="middle" font-size="13">{_esc(title)}</text>')
        x0, y0 = _MARGIN["left"], _MARGIN["top"] + ph
        out.append(f'<line x1="{x0}" y1="{y0}" x2="{x0 + pw}" y2="{y0}" stroke="black"/>')
        out.append(f'<line x1="{x0}" y1="{_MARGIN["top"]}" x2="{x0}" y2="{y0}" stroke="black"/>')
        for t in epochs:
            out.append(f'<text x="{px(t):.1f}" y="{y0 + 16}" text-anchor="middle">{t:g}</text>')
        for k in range(6):
            yv = y_max * k / 5
            out.append(f'<text x="{x0 - 6}" y="{py(yv) + 4:.1f}" text-anchor="end">{yv:g}</text>')
        out.append(f'<text x="{x0 + pw / 2:.1f}" y="{y0 + 36}" text-anchor="middle">T_S (s)</text>')
        out.append(f'<text x="14" y="{_MARGIN["top"] + ph / 2:.1f}" text-anchor="middle" '
                   f'transform="rotate(-90 14 {_MARGIN["top"] + ph / 2:.1f})">mean convergence time (s)</text>')
        for vi, v in enumerate(velocities):
            color = _COLORS[vi % len(_COLORS)]
            pts = []
            for c in cells:
                if (str(c.schedule), str(c.mode), _r6(c.epsilon)) != (sched, mode, eps) or _r6(c.velocity_mps) != v:
                    continue
                if c.mean_s is None:
                    continue
                x, m = px(_r6(c.T_S_s)), py(_r6(c.mean_s))
                pts.append(f"{x:.2f},{m:.2f}")
                out.append(f'<line x1="{x:.2f}" y1="{py(_r6(c.ci95_lo_s)):.2f}" x2="{x:.2f}" '
                           f'y2="{py(_r6(c.ci95_hi_s)):.2f}" stroke="{color}"/>')
            if pts:
                out.append(f'<polyline points="{" ".join(pts)}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        out.append("</g>")
    ly = _PANEL_H + 12
    for vi, v in enumerate(velocities):
        color = _COLORS[vi % len(_COLORS)]
        y = ly + 16 * vi
        out.append(f'<line x1="20" y1="{y}" x2="44" y2="{y}" stroke="{color}" stroke-width="1.5"/>')
        out.append(f'<text x="50" y="{y + 4}">v = {v:g} m/s</text>')
    out.append("</svg>")
    sink.write("\n".join(out) + "\n")


# --- config files ------------------------------------------------------------

def parse_config(text):
    """Parse ``key = value`` sweep settings into a :class:`SweepGrid`.

    Keys are the SweepGrid field names; list values are comma-separated.
    ``variants`` entries are ``schedule/mode``.  Missing keys take the
    :func:`default_grid` defaults.
    """
    base = default_grid()
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in values:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = parse_value(key, value)
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    return grid_with(base, **values)


def grid_with(base, **overrides):
    """Copy ``base`` with some fields replaced; explicit schedules/modes drop the base variants."""
    fields = {
        "epochs_s": base.epochs_s, "velocities_mps": base.velocities_mps, "schedules": base.schedules,
        "epsilons": base.epsilons, "modes": base.modes, "episodes_per_cell": base.episodes_per_cell,
        "base_seed": base.base_seed, "variants": base.variants,
    }
    unknown = set(overrides) - set(fields)
    if unknown:
        raise ValueError(f"unknown sweep key(s): {', '.join(sorted(unknown))}")
    if ("schedules" in overrides or "modes" in overrides) and "variants" not in overrides:
        fields["variants"] = None
    fields.update({k: v for k, v in overrides.items() if v is not None})
    return SweepGrid(**fields)


def parse_value(key, value):
    """Parse one config value (also used for the equivalent CLI flags)."""
    if key in ("episodes_per_cell", "base_seed"):
        return int(value, 0)
    if key not in _LIST_KEYS:
        raise ValueError(f"unknown sweep key {key!r}")
    items = [v.strip() for v in value.split(",") if v.strip()]
    if not items:
        raise ValueError(f"{key} needs at least one value")
    if key in ("epochs_s", "velocities_mps", "epsilons"):
        return tuple(float(v) for v in items)
    if key == "schedules":
        return tuple(ag.parse_schedule(v) for v in items)
    if key == "modes":
        return tuple(ag.parse_mode(v) for v in items)
    pairs = []
    for v in items:
        sched, sep, mode = v.rpartition("/")
        if not sep:
            raise ValueError(f"variant {v!r} must be 'schedule/mode'")
        pairs.append((ag.parse_schedule(sched), ag.parse_mode(mode)))
    return tuple(pairs)


def to_csv_text(result):
    buf = io.StringIO()
    write_csv(result, buf)
    return buf.getvalue()
