"""Pure-Python/numpy reference versions of the compiled kernels.

Selected automatically when ``rfnav._kernels`` is not built, or forced with
``RFNAV_BACKEND=python``.  Results agree with the compiled versions to
floating-point rounding (the compiled fading sum uses a phasor recurrence
re-anchored every 1024 samples; here every sample is evaluated directly).
"""

import math

import numpy as np

_CHUNK = 4096


def fading_trace(omega, phase, t0, dt, n):
    """Complex sum-of-sinusoids envelope at ``t0 + k*dt`` for ``k < n``."""
    omega = np.asarray(omega, dtype=float)
    phase = np.asarray(phase, dtype=float)
    norm = 1.0 / math.sqrt(omega.size)
    out = np.empty(n, dtype=np.complex128)
    for start in range(0, n, _CHUNK):
        k = np.arange(start, min(n, start + _CHUNK))
        arg = np.multiply.outer(t0 + k * dt, omega) + phase
        out[start:start + k.size] = (np.cos(arg).sum(axis=1) + 1j * np.sin(arg).sum(axis=1)) * norm
    return out


def epoch_mean_power(omega, phase, t0, dt, n, x0, y0, vx, vy, sx, sy,
                     ptx_mw, pl_intercept_db, pl_slope_db, d_min, faded, log_domain=False):
    """Mean received power (mW) over ``n`` samples of a straight-line segment.

    Sample ``k`` is taken at absolute time ``t0 + k*dt`` at position
    ``(x0 + vx*k*dt, y0 + vy*k*dt)``.  With ``log_domain`` the mean of the
    natural log of the power is returned instead.
    """
    t = np.arange(n) * dt
    d2 = (x0 + vx * t - sx) ** 2 + (y0 + vy * t - sy) ** 2
    d2 = np.maximum(d2, d_min * d_min)
    g = ptx_mw * 10.0 ** (-pl_intercept_db / 10.0) * (d2 * 1e-6) ** (-pl_slope_db / 20.0)
    if faded:
        h = fading_trace(omega, phase, t0, dt, n)
        g = g * (h.real ** 2 + h.imag ** 2)
    if log_domain:
        return float(np.log(g).sum() / n)
    return float(g.sum() / n)


def segment_free(wall, x0, y0, x1, y1):
    """True iff no wall cell's closed square meets the closed segment.

    Coordinates are in cell units; ``wall[j, i]`` is the cell spanning
    ``[i, i+1] x [j, j+1]``.  Touching the outer boundary counts as a hit.
    """
    h, w = wall.shape
    if not (0.0 < x0 < w and 0.0 < y0 < h and 0.0 < x1 < w and 0.0 < y1 < h):
        return False
    dx, dy = x1 - x0, y1 - y0
    for i in range(math.ceil(min(x0, x1)) - 1, math.floor(max(x0, x1)) + 1):
        if dx == 0.0:
            ylo, yhi = min(y0, y1), max(y0, y1)
        else:
            ta, tb = (i - x0) / dx, (i + 1 - x0) / dx
            t_lo, t_hi = max(0.0, min(ta, tb)), min(1.0, max(ta, tb))
            if t_lo > t_hi:
                continue
            ya, yb = y0 + t_lo * dy, y0 + t_hi * dy
            ylo, yhi = min(ya, yb), max(ya, yb)
        j_lo = max(0, math.ceil(ylo) - 1)
        j_hi = min(h - 1, math.floor(yhi))
        for j in range(j_lo, j_hi + 1):
            if wall[j, i]:
                return False
    return True


def first_contact(wall, x0, y0, x1, y1):
    """Smallest ``t`` in ``[0, 1]`` where ``p0 + t*(p1 - p0)`` touches a wall
    square or the grid boundary; ``inf`` if the closed segment is free.

    Same conventions as :func:`segment_free`; ``p0`` must be strictly inside
    the grid.
    """
    h, w = wall.shape
    dx, dy = x1 - x0, y1 - y0
    best = math.inf
    # grid boundary, only if the end point is on or past it
    for p, p1, d, hi in ((x0, x1, dx, w), (y0, y1, dy, h)):
        if p1 >= hi:
            best = min(best, (hi - p) / d, 1.0)
        elif p1 <= 0.0:
            best = min(best, -p / d, 1.0)
    i_lo = max(0, math.ceil(min(x0, x1)) - 1)
    i_hi = min(w - 1, math.floor(max(x0, x1)))
    for i in range(i_lo, i_hi + 1):
        if dx == 0.0:
            cx_lo, cx_hi = 0.0, 1.0
        else:
            ta, tb = (i - x0) / dx, (i + 1 - x0) / dx
            cx_lo, cx_hi = max(0.0, min(ta, tb)), min(1.0, max(ta, tb))
            if cx_lo > cx_hi:
                continue
        ya, yb = y0 + cx_lo * dy, y0 + cx_hi * dy
        j_lo = max(0, math.ceil(min(ya, yb)) - 1)
        j_hi = min(h - 1, math.floor(max(ya, yb)))
        for j in range(j_lo, j_hi + 1):
            if not wall[j, i]:
                continue
            if dy == 0.0:
                t_in = cx_lo
            else:
                ta, tb = (j - y0) / dy, (j + 1 - y0) / dy
                t_in = max(cx_lo, min(ta, tb))
                if t_in > min(cx_hi, max(ta, tb)):
                    continue
            if t_in < best:
                best = t_in
    return best
