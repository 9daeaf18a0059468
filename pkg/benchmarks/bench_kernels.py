"""Compare the compiled and numpy kernel backends.

    python benchmarks/bench_kernels.py [--repeat N]

Times one 8000-sample epoch (fading on and off), a long collision check, a
first-contact ray cast, and a full episode on the bundled map.
"""

import argparse
import timeit

from rfnav import channel as ch
from rfnav import kernels
from rfnav.sim import EpisodeConfig, run_episode
from rfnav.world import load_default_map


def cases(occ, fading):
    src = occ.source_xy
    w = occ.wall
    c = occ.cell_size_m

    def epoch(k, faded):
        return lambda: k.epoch_mean_power(fading.omega, fading.phases, 12.3, 1e-3, 8000, 0.75, 0.75, 5.0, 0.0,
                                          src[0], src[1], 1.0, ch.PL_INTERCEPT_DB, ch.PL_SLOPE_DB, ch.D_MIN_M,
                                          faded, False)

    def segment(k):
        return lambda: k.segment_free(w, 0.75 / c, 0.75 / c, 0.75 / c, 119.0 / c)

    def contact(k):
        return lambda: k.first_contact(w, 0.75 / c, 0.75 / c, 70.0 / c, 69.0 / c)

    def episode(k):
        cfg = EpisodeConfig(map=occ, velocity_mps=5.0, epoch_s=2.0, seed=3)
        return lambda: run_episode(cfg, record_steps=False, backend=k)

    return {
        "epoch_mean_power, 8000 samples, faded": (epoch, True),
        "epoch_mean_power, 8000 samples, no fading": (epoch, False),
        "segment_free, 118 m segment": (segment, None),
        "first_contact, diagonal ray": (contact, None),
        "run_episode, v=5 T_S=2 seed 3": (episode, None),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    occ = load_default_map()
    fading = ch.create_fading(10.0, ch.ChannelParams(), 7)
    names = kernels.available()
    print(f"backends: {', '.join(names)} (active: {kernels.BACKEND})")
    print(f"{'case':45s}" + "".join(f"{n:>14s}" for n in names) + ("     speed-up" if len(names) > 1 else ""))
    for label, (make, arg) in cases(occ, fading).items():
        row = []
        for name in names:
            k = kernels.get_backend(name)
            fn = make(k, arg) if arg is not None else make(k)
            number = 1
            while timeit.timeit(fn, number=number) < 0.05 and number < 10 ** 6:
                number *= 4
            best = min(timeit.repeat(fn, number=number, repeat=args.repeat)) / number
            row.append(best)
        cols = "".join(f"{_fmt(t):>14s}" for t in row)
        speed = f"{row[names.index('python')] / row[names.index('cython')]:12.1f}x" if len(names) > 1 else ""
        print(f"{label:45s}{cols}{speed}")


def _fmt(t):
    if t < 1e-6:
        return f"{t * 1e9:.0f} ns"
    if t < 1e-3:
        return f"{t * 1e6:.1f} us"
    if t < 1:
        return f"{t * 1e3:.2f} ms"
    return f"{t:.2f} s"


if __name__ == "__main__":
    main()
