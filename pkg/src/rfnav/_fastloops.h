/* Vectorisable inner loops for the Cython kernels.
 *
 * Kept in C so the loops can be declared alias-free.  With RFNAV_VECTOR_MATH
 * (glibc on x86-64, set by setup.py) exp/log are routed to libmvec SIMD
 * variants; this avoids -ffast-math, which would change the FP environment
 * of the whole interpreter. */
#ifndef RFNAV_FASTLOOPS_H
#define RFNAV_FASTLOOPS_H

#include <math.h>
#include <stddef.h>

#ifdef RFNAV_VECTOR_MATH
__attribute__((simd("notinbranch"))) double exp(double);
__attribute__((simd("notinbranch"))) double log(double);
#define RFNAV_SIMD _Pragma("omp simd")
#else
#define RFNAV_SIMD
#endif

/* Writes the phasor sum into *sr, *si and advances every phasor by its rotor. */
static inline void rfnav_phasor_step(double *restrict re, double *restrict im,
                                     const double *restrict rr, const double *restrict ri,
                                     ptrdiff_t m, double *sr, double *si)
{
    double a = 0.0, b = 0.0;
    for (ptrdiff_t i = 0; i < m; i++) {
        double x = re[i], y = im[i];
        a += x;
        b += y;
        re[i] = x * rr[i] - y * ri[i];
        im[i] = x * ri[i] + y * rr[i];
    }
    *sr = a;
    *si = b;
}

/* g[k] = exp(log_scale + expo * log(max(d2_k, d2min))) along a straight segment,
 * d2_k = |p0 + v*(t_first + k*dt) - src|^2. */
static inline void rfnav_path_gain(double *restrict g, ptrdiff_t n, double t_first, double dt,
                                   double ex0, double ey0, double vx, double vy,
                                   double d2min, double log_scale, double expo)
{
    RFNAV_SIMD
    for (ptrdiff_t k = 0; k < n; k++) {
        double t = t_first + (double)k * dt;
        double ex = ex0 + vx * t, ey = ey0 + vy * t;
        double d2 = ex * ex + ey * ey;
        d2 = d2 < d2min ? d2min : d2;
        g[k] = exp(log_scale + expo * log(d2));
    }
}

#endif
