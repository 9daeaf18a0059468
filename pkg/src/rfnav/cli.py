"""Command-line entry point: ``rfnav <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 invalid input or data.  Diagnostics
go to stderr; stdout carries data only.
"""

import argparse
import io
import math
import os
import sys

import numpy as np

from . import agent as ag
from . import channel as ch
from . import experiment as ex
from . import sim
from .world import DEFAULT_MAP_NAME, MapError, distance, load_default_map, load_map

# names that select the bundled map when no such file exists
BUNDLED_MAP_ALIASES = ("default", "default.map", DEFAULT_MAP_NAME)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def resolve_map(arg):
    if arg is None or (arg in BUNDLED_MAP_ALIASES and not os.path.exists(arg)):
        return load_default_map()
    return load_map(arg)


def _positive(text):
    x = float(text)
    if not (math.isfinite(x) and x > 0):
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return x


def _seed(text):
    x = int(text, 0)
    if not 0 <= x < 2 ** 64:
        raise argparse.ArgumentTypeError(f"seed must be in [0, 2**64), got {text}")
    return x


def _floats(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def build_parser():
    p = _Parser(prog="rfnav", description="Q-learning UAV navigation toward an RF source under Rayleigh fading.")
    sub = p.add_subparsers(dest="command", metavar="<command>", parser_class=_Parser)
    sub.required = True

    v = sub.add_parser("validate-map", help="parse a map file and print its stats")
    v.add_argument("--map", required=True, help="map file, or 'default.map' for the bundled floor")

    r = sub.add_parser("run", help="run one episode and write its JSONL log")
    r.add_argument("--map", required=True, help="map file, or 'default.map' for the bundled floor")
    r.add_argument("--seed", type=_seed, required=True)
    r.add_argument("--velocity", type=_positive, required=True, help="UAV speed (m/s)")
    r.add_argument("--epoch", type=_positive, required=True, help="sampling duration T_S (s)")
    r.add_argument("--epsilon", type=float, default=ag.DEFAULT_EPSILON)
    r.add_argument("--gamma", type=float, default=ag.DEFAULT_GAMMA)
    r.add_argument("--schedule", default=str(ag.Varying()), help="fixed:A or varying:LO:HI")
    r.add_argument("--mode", default=str(ag.Mode.TEN_STATE), help="tenstate or singlestate")
    r.add_argument("--timeout", type=_positive, default=sim.DEFAULT_TIMEOUT_S, help="simulated seconds")
    r.add_argument("--no-fading", action="store_true", help="path loss only")
    r.add_argument("--averaging", choices=("linear", "db"), default="linear")
    r.add_argument("--out", help="log file (default: stdout)")

    s = sub.add_parser("sweep", help="run a Monte Carlo sweep and write CSV (and SVG)")
    s.add_argument("--config", help="key = value sweep file; flags below override it")
    s.add_argument("--map", help="map file (default: bundled floor)")
    s.add_argument("--out-csv", required=True)
    s.add_argument("--out-svg")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--epochs", type=_floats, help="comma-separated T_S values")
    s.add_argument("--velocities", type=_floats, help="comma-separated speeds")
    s.add_argument("--epsilons", type=_floats)
    s.add_argument("--schedules", help="comma-separated fixed:A / varying:LO:HI")
    s.add_argument("--modes", help="comma-separated tenstate / singlestate")
    s.add_argument("--variants", help="comma-separated schedule/mode pairs")
    s.add_argument("--episodes", type=int, help="episodes per cell")
    s.add_argument("--base-seed", type=_seed)
    s.add_argument("--timeout", type=_positive, default=sim.DEFAULT_TIMEOUT_S)

    c = sub.add_parser("channel-trace", help="dump a fading gain trace as CSV")
    c.add_argument("--velocity", type=_positive, required=True)
    c.add_argument("--seed", type=_seed, required=True)
    c.add_argument("--duration", type=_positive, required=True, help="seconds")
    c.add_argument("--dt", type=_positive, default=sim.DEFAULT_SAMPLE_INTERVAL_S)
    c.add_argument("--carrier", type=_positive, default=ch.DEFAULT_CARRIER_HZ, help="Hz")
    c.add_argument("--out", required=True)

    pl = sub.add_parser("plot", help="render the SVG from a saved sweep CSV")
    pl.add_argument("--in-csv", required=True)
    pl.add_argument("--out-svg", required=True)
    return p


def _write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def cmd_validate_map(args, out):
    occ = resolve_map(args.map)
    w, h = occ.extent_m
    free = 1.0 - occ.wall.mean()
    out.write(f"map: {occ.name}\n")
    out.write(f"grid: {occ.width_cells} x {occ.height_cells} cells of {occ.cell_size_m:g} m\n")
    out.write(f"extent: {w:g} m x {h:g} m\n")
    out.write(f"free: {100 * free:.1f}%\n")
    out.write(f"start: ({occ.start_xy.x_m:g}, {occ.start_xy.y_m:g}) m\n")
    out.write(f"source: ({occ.source_xy.x_m:g}, {occ.source_xy.y_m:g}) m\n")
    out.write(f"start-source distance: {distance(occ.start_xy, occ.source_xy):.2f} m\n")
    out.write("connectivity: OK\n")


def cmd_run(args, out):
    occ = resolve_map(args.map)
    agent = ag.AgentConfig(epsilon=args.epsilon, gamma=args.gamma,
                           lr_schedule=ag.parse_schedule(args.schedule), mode=ag.parse_mode(args.mode))
    cfg = sim.EpisodeConfig(map=occ, velocity_mps=args.velocity, epoch_s=args.epoch, seed=args.seed,
                            agent=agent, timeout_s=args.timeout, fading=not args.no_fading,
                            averaging=args.averaging).validate()
    text = sim.run_episode(cfg).to_jsonl()
    if args.out:
        _write_text(args.out, text)
    else:
        out.write(text)


def _sweep_grid(args):
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            grid = ex.parse_config(fh.read())
    else:
        grid = ex.default_grid()
    overrides = {
        "epochs_s": args.epochs,
        "velocities_mps": args.velocities,
        "epsilons": args.epsilons,
        "episodes_per_cell": args.episodes,
        "base_seed": args.base_seed,
    }
    for key, text in (("schedules", args.schedules), ("modes", args.modes), ("variants", args.variants)):
        if text is not None:
            overrides[key] = ex.parse_value(key, text)
    return ex.grid_with(grid, **{k: v for k, v in overrides.items() if v is not None})


def cmd_sweep(args, out):
    if args.workers < 1:
        raise UsageError(f"--workers must be >= 1, got {args.workers}")
    grid = _sweep_grid(args)
    occ = resolve_map(args.map)
    if args.out_svg and len(set(grid.epochs_s)) < 2:
        raise ValueError("plot needs at least 2 T_S values; drop --out-svg and use the CSV")
    result = ex.run_sweep(grid, occ, workers=args.workers, timeout_s=args.timeout)
    csv_text = ex.to_csv_text(result)
    svg = None
    if args.out_svg:
        buf = io.StringIO()
        ex.emit_plot(result, buf)
        svg = buf.getvalue()
    _write_text(args.out_csv, csv_text)
    if svg is not None:
        _write_text(args.out_svg, svg)
    print(f"{len(result.cells)} cells x {grid.episodes_per_cell} episodes in {result.total_wall_time_s:.1f} s",
          file=sys.stderr)


def cmd_channel_trace(args, out):
    params = ch.ChannelParams(carrier_hz=args.carrier)
    fading = ch.create_fading(args.velocity, params, args.seed)
    n = int(math.floor(args.duration / args.dt + 1e-9))
    if n < 1:
        raise ValueError("duration shorter than one sample interval")
    h = fading.trace(0.0, args.dt, n)
    gain_db = 10.0 * np.log10(np.maximum(h.real ** 2 + h.imag ** 2, 1e-300))
    buf = io.StringIO()
    buf.write("time_s,gain_db\n")
    for k, g in enumerate(gain_db.tolist()):
        buf.write(f"{k * args.dt:.6f},{g:.6f}\n")
    _write_text(args.out, buf.getvalue())


def cmd_plot(args, out):
    with open(args.in_csv, encoding="utf-8") as fh:
        result = ex.read_csv(fh)
    buf = io.StringIO()
    ex.emit_plot(result, buf)
    _write_text(args.out_svg, buf.getvalue())


COMMANDS = {
    "validate-map": cmd_validate_map,
    "run": cmd_run,
    "sweep": cmd_sweep,
    "channel-trace": cmd_channel_trace,
    "plot": cmd_plot,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    # buffer stdout so a failure never leaves partial data behind
    out = io.StringIO()
    try:
        COMMANDS[args.command](args, out)
    except UsageError as exc:
        print(f"rfnav {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except MapError as exc:
        print(f"rfnav {args.command}: invalid map {args.map}: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"rfnav {args.command}: error: {exc}", file=sys.stderr)
        return 2
    sys.stdout.write(out.getvalue())
    sys.stdout.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
