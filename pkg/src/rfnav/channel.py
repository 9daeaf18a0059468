"""Received signal strength: 3GPP log-distance path loss plus correlated Rayleigh fading.

The fading process is a Clarke-model sum of sinusoids (Pop-Beaulieu form)::

    h(t) = N**-0.5 * sum_n exp(j * (2*pi*f_d*cos(alpha_n)*t + phi_n))
    alpha_n = pi * (n + xi) / N,    n = 0 .. N-1

with one uniform offset ``xi`` in [0, 1) and i.i.d. uniform phases ``phi_n``.
Only ``cos(alpha)`` enters, so the half circle carries the full Clarke
Doppler spectrum.  Over the full circle, sinusoids at ``alpha`` and
``alpha + pi`` (or ``-alpha``) get exactly opposite (or equal) Doppler
shifts; their cross terms never average out and bias the in-phase
autocorrelation and the mean power of any single realisation.  On the half
circle all Doppler shifts are distinct and no two are negatives of each
other unless ``xi`` is 0 or 1/2.  The
gain is a pure function of ``t``, so it can be sampled at any instant and
from any number of threads.

Sign convention: :func:`rss_instant` returns ``P_tx - PL(d) + gain_db``.  The
gain is signed (constructive fades are positive), so a fade *loss* ``S`` in
the usual link-budget form equals ``-gain_db``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels

SPEED_OF_LIGHT = 299_792_458.0

PL_INTERCEPT_DB = 128.1
PL_SLOPE_DB = 37.6
D_MIN_M = 0.1

DEFAULT_CARRIER_HZ = 2.4e9
DEFAULT_TX_POWER_DBM = 0.0
DEFAULT_NUM_SINUSOIDS = 64

_CHUNK = 8192


@dataclass(frozen=True)
class ChannelParams:
    tx_power_dbm: float = DEFAULT_TX_POWER_DBM
    carrier_hz: float = DEFAULT_CARRIER_HZ

    def __post_init__(self):
        if not math.isfinite(self.tx_power_dbm):
            raise ValueError(f"tx_power_dbm must be finite, got {self.tx_power_dbm}")
        if not (math.isfinite(self.carrier_hz) and self.carrier_hz > 0):
            raise ValueError(f"carrier_hz must be positive, got {self.carrier_hz}")

    @property
    def tx_power_mw(self):
        return 10.0 ** (self.tx_power_dbm / 10.0)


@dataclass(frozen=True, eq=False)
class FadingProcess:
    """Seeded sum-of-sinusoids Rayleigh process.

    ``enabled=False`` gives a unit-gain (0 dB) process, used to switch fading
    off without changing any other part of the pipeline.
    """

    doppler_hz: float
    num_sinusoids: int
    angles: np.ndarray = field(repr=False)
    phases: np.ndarray = field(repr=False)
    seed: int
    enabled: bool = True

    def __post_init__(self):
        if not (math.isfinite(self.doppler_hz) and self.doppler_hz >= 0):
            raise ValueError(f"doppler_hz must be >= 0, got {self.doppler_hz}")
        if self.num_sinusoids < 8:
            raise ValueError(f"num_sinusoids must be >= 8, got {self.num_sinusoids}")
        # shared read-only arrays; the kernels need contiguous float64
        for name in ("angles", "phases"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        omega = 2.0 * math.pi * self.doppler_hz * np.cos(self.angles)
        omega.setflags(write=False)
        object.__setattr__(self, "omega", omega)

    def envelope(self, time_s):
        """Complex gain ``h(t)``; accepts scalars or arrays of times."""
        t = np.asarray(time_s, dtype=float)
        if not np.all(np.isfinite(t)):
            raise ValueError("time must be finite")
        if not self.enabled:
            return np.ones_like(t, dtype=complex) if t.ndim else 1.0 + 0.0j
        flat = t.ravel()
        h = np.empty(flat.size, dtype=complex)
        for start in range(0, flat.size, _CHUNK):
            arg = np.multiply.outer(flat[start:start + _CHUNK], self.omega) + self.phases
            h[start:start + _CHUNK] = np.cos(arg).sum(axis=1) + 1j * np.sin(arg).sum(axis=1)
        h /= math.sqrt(self.num_sinusoids)
        return h.reshape(t.shape) if t.ndim else complex(h[0])

    def trace(self, t0, dt, n, backend=None):
        """Complex gain at ``t0 + k*dt`` for ``k < n`` via the kernel backend."""
        if not self.enabled:
            return np.ones(n, dtype=complex)
        k = kernels.resolve(backend)
        return k.fading_trace(self.omega, self.phases, float(t0), float(dt), int(n))


def path_loss_db(distance_m):
    """3GPP TR 36.814 path loss ``128.1 + 37.6*log10(d/1km)`` in dB.

    Distances below ``D_MIN_M`` are clamped to it.
    """
    d = float(distance_m)
    if not math.isfinite(d) or d <= 0:
        raise ValueError(f"distance must be positive and finite, got {distance_m}")
    d = max(d, D_MIN_M)
    return PL_INTERCEPT_DB + PL_SLOPE_DB * math.log10(d / 1000.0)


def doppler_hz(velocity_mps, carrier_hz):
    return velocity_mps * carrier_hz / SPEED_OF_LIGHT


def create_fading(velocity_mps, params, seed, num_sinusoids=DEFAULT_NUM_SINUSOIDS):
    if not (math.isfinite(velocity_mps) and velocity_mps >= 0):
        raise ValueError(f"velocity must be >= 0, got {velocity_mps}")
    rng = np.random.default_rng(seed)
    xi = rng.uniform(0.0, 1.0)
    phases = rng.uniform(-math.pi, math.pi, size=num_sinusoids)
    angles = math.pi * (np.arange(num_sinusoids) + xi) / num_sinusoids
    return FadingProcess(
        doppler_hz=doppler_hz(velocity_mps, params.carrier_hz),
        num_sinusoids=num_sinusoids,
        angles=angles,
        phases=phases,
        seed=seed,
    )


def unit_fading(num_sinusoids=DEFAULT_NUM_SINUSOIDS):
    """A disabled (always 0 dB) process."""
    z = np.zeros(num_sinusoids)
    return FadingProcess(doppler_hz=0.0, num_sinusoids=num_sinusoids, angles=z, phases=z, seed=0, enabled=False)


def fading_gain_db(process, time_s):
    """``10*log10(|h(t)|^2)``; vectorised over ``time_s``."""
    h = process.envelope(time_s)
    p = np.abs(h) ** 2
    with np.errstate(divide="ignore"):
        g = 10.0 * np.log10(p)
    return g if np.ndim(g) else float(g)


def rss_instant(params, distance_m, process, time_s):
    """Instantaneous RSS in dBm at ``distance_m`` and absolute time ``time_s``."""
    return params.tx_power_dbm - path_loss_db(distance_m) + fading_gain_db(process, time_s)


@dataclass(frozen=True)
class RssSample:
    time_s: float
    rss_dbm: float

    def __post_init__(self):
        if not (math.isfinite(self.time_s) and self.time_s >= 0):
            raise ValueError(f"time_s must be >= 0, got {self.time_s}")
        if not math.isfinite(self.rss_dbm):
            raise ValueError(f"rss_dbm must be finite, got {self.rss_dbm}")


def dbm_to_mw(dbm):
    return 10.0 ** (np.asarray(dbm, dtype=float) / 10.0)


def mw_to_dbm(mw):
    return 10.0 * np.log10(mw)
