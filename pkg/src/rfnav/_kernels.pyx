# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: fading phasor sums, per-epoch power sampling, supercover collision
and first-contact ray casting.

Signatures mirror :mod:`rfnav._pykernels` exactly; see that module for the
reference semantics.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, sqrt, exp, log, floor, ceil, INFINITY
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef extern from "_fastloops.h":
    void rfnav_phasor_step(double* re, double* im, const double* rr, const double* ri,
                           Py_ssize_t m, double* sr, double* si) noexcept nogil
    void rfnav_path_gain(double* g, Py_ssize_t n, double t_first, double dt,
                         double ex0, double ey0, double vx, double vy,
                         double d2min, double log_scale, double expo) noexcept nogil

DEF ANCHOR = 1024


cdef inline void _anchor(const double* omega, const double* phase, Py_ssize_t m, double t,
                         double* re, double* im) noexcept nogil:
    cdef Py_ssize_t i
    cdef double a
    for i in range(m):
        a = omega[i] * t + phase[i]
        re[i] = cos(a)
        im[i] = sin(a)


cdef inline void _rotors(const double* omega, Py_ssize_t m, double dt,
                         double* rr, double* ri) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(m):
        rr[i] = cos(omega[i] * dt)
        ri[i] = sin(omega[i] * dt)


def fading_trace(const double[::1] omega, const double[::1] phase,
                 double t0, double dt, Py_ssize_t n):
    cdef Py_ssize_t m = omega.shape[0]
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] out = np.empty(n, dtype=np.complex128)
    cdef double* re = <double*> malloc(4 * m * sizeof(double))
    if re == NULL:
        raise MemoryError()
    cdef double* im = re + m
    cdef double* rr = re + 2 * m
    cdef double* ri = re + 3 * m
    cdef double norm = 1.0 / sqrt(<double> m)
    cdef Py_ssize_t k
    cdef double sr, si
    with nogil:
        _rotors(&omega[0], m, dt, rr, ri)
        for k in range(n):
            if k % ANCHOR == 0:
                _anchor(&omega[0], &phase[0], m, t0 + k * dt, re, im)
            rfnav_phasor_step(re, im, rr, ri, m, &sr, &si)
            out[k].real = sr * norm
            out[k].imag = si * norm
    free(re)
    return out


cdef inline double expo_log_km(double slope_db) noexcept nogil:
    # d2 is in m^2; fold the 1/1e6 km^2 conversion into the constant
    return -slope_db / 20.0 * log(1e6)


def epoch_mean_power(const double[::1] omega, const double[::1] phase,
                     double t0, double dt, Py_ssize_t n,
                     double x0, double y0, double vx, double vy,
                     double sx, double sy,
                     double ptx_mw, double pl_intercept_db, double pl_slope_db,
                     double d_min, bint faded, bint log_domain=False):
    cdef Py_ssize_t m = omega.shape[0]
    cdef double* re = <double*> malloc((4 * m + ANCHOR) * sizeof(double))
    if re == NULL:
        raise MemoryError()
    cdef double* im = re + m
    cdef double* rr = re + 2 * m
    cdef double* ri = re + 3 * m
    cdef double* g = re + 4 * m
    cdef double expo = -pl_slope_db / 20.0
    cdef double log_scale = log(ptx_mw) - pl_intercept_db / 10.0 * log(10.0) - expo_log_km(pl_slope_db)
    cdef double inv_m = 1.0 / <double> m
    cdef double acc = 0.0, sr, si
    cdef Py_ssize_t k0, k, nk
    with nogil:
        if faded:
            _rotors(&omega[0], m, dt, rr, ri)
        k0 = 0
        while k0 < n:
            nk = n - k0 if n - k0 < ANCHOR else ANCHOR
            rfnav_path_gain(g, nk, k0 * dt, dt, x0 - sx, y0 - sy, vx, vy,
                            d_min * d_min, log_scale, expo)
            if faded:
                _anchor(&omega[0], &phase[0], m, t0 + k0 * dt, re, im)
                for k in range(nk):
                    rfnav_phasor_step(re, im, rr, ri, m, &sr, &si)
                    g[k] = g[k] * ((sr * sr + si * si) * inv_m)
            if log_domain:
                for k in range(nk):
                    acc = acc + log(g[k])
            else:
                for k in range(nk):
                    acc = acc + g[k]
            k0 = k0 + nk
    free(re)
    return acc / n


def segment_free(const unsigned char[:, ::1] wall,
                 double x0, double y0, double x1, double y1):
    cdef Py_ssize_t h = wall.shape[0], w = wall.shape[1]
    cdef Py_ssize_t i, j, i_lo, i_hi, j_lo, j_hi
    cdef double dx = x1 - x0, dy = y1 - y0
    cdef double ta, tb, t_lo, t_hi, ya, yb, ylo, yhi
    if not (0.0 < x0 < w and 0.0 < y0 < h and 0.0 < x1 < w and 0.0 < y1 < h):
        return False
    i_lo = <Py_ssize_t> ceil(x0 if x0 < x1 else x1) - 1
    i_hi = <Py_ssize_t> floor(x1 if x0 < x1 else x0)
    for i in range(i_lo, i_hi + 1):
        if dx == 0.0:
            ylo = y0 if y0 < y1 else y1
            yhi = y1 if y0 < y1 else y0
        else:
            ta = (i - x0) / dx
            tb = (i + 1 - x0) / dx
            t_lo = ta if ta < tb else tb
            t_hi = tb if ta < tb else ta
            if t_lo < 0.0:
                t_lo = 0.0
            if t_hi > 1.0:
                t_hi = 1.0
            if t_lo > t_hi:
                continue
            ya = y0 + t_lo * dy
            yb = y0 + t_hi * dy
            ylo = ya if ya < yb else yb
            yhi = yb if ya < yb else ya
        j_lo = <Py_ssize_t> ceil(ylo) - 1
        j_hi = <Py_ssize_t> floor(yhi)
        if j_lo < 0:
            j_lo = 0
        if j_hi > h - 1:
            j_hi = h - 1
        for j in range(j_lo, j_hi + 1):
            if wall[j, i]:
                return False
    return True


def first_contact(const unsigned char[:, ::1] wall,
                  double x0, double y0, double x1, double y1):
    cdef Py_ssize_t h = wall.shape[0], w = wall.shape[1]
    cdef Py_ssize_t i, j, i_lo, i_hi, j_lo, j_hi
    cdef double dx = x1 - x0, dy = y1 - y0
    cdef double best = INFINITY
    cdef double ta, tb, cx_lo, cx_hi, ya, yb, t_in, t_out
    # grid boundary, only if the end point is on or past it
    if x1 >= w:
        best = (w - x0) / dx
    elif x1 <= 0.0:
        best = -x0 / dx
    if y1 >= h:
        t_in = (h - y0) / dy
        if t_in < best:
            best = t_in
    elif y1 <= 0.0:
        t_in = -y0 / dy
        if t_in < best:
            best = t_in
    if 1.0 < best < INFINITY:
        best = 1.0
    i_lo = <Py_ssize_t> ceil(x0 if x0 < x1 else x1) - 1
    i_hi = <Py_ssize_t> floor(x1 if x0 < x1 else x0)
    if i_lo < 0:
        i_lo = 0
    if i_hi > w - 1:
        i_hi = w - 1
    for i in range(i_lo, i_hi + 1):
        if dx == 0.0:
            cx_lo = 0.0
            cx_hi = 1.0
        else:
            ta = (i - x0) / dx
            tb = (i + 1 - x0) / dx
            cx_lo = ta if ta < tb else tb
            cx_hi = tb if ta < tb else ta
            if cx_lo < 0.0:
                cx_lo = 0.0
            if cx_hi > 1.0:
                cx_hi = 1.0
            if cx_lo > cx_hi:
                continue
        ya = y0 + cx_lo * dy
        yb = y0 + cx_hi * dy
        j_lo = <Py_ssize_t> ceil(ya if ya < yb else yb) - 1
        j_hi = <Py_ssize_t> floor(yb if ya < yb else ya)
        if j_lo < 0:
            j_lo = 0
        if j_hi > h - 1:
            j_hi = h - 1
        for j in range(j_lo, j_hi + 1):
            if not wall[j, i]:
                continue
            if dy == 0.0:
                t_in = cx_lo
            else:
                ta = (j - y0) / dy
                tb = (j + 1 - y0) / dy
                t_in = ta if ta < tb else tb
                t_out = tb if ta < tb else ta
                if t_in < cx_lo:
                    t_in = cx_lo
                if t_out > cx_hi:
                    t_out = cx_hi
                if t_in > t_out:
                    continue
            if t_in < best:
                best = t_in
    return best
