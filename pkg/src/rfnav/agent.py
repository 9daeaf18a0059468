"""Tabular Q-learning over RSS bins with epsilon-greedy exploration.

States are the ten RSS bins below (dBm); bin 1 is the terminal "vicinity"
bin.  Shared boundaries go to the stronger-signal state, so the bins are
half-open ``[lower, upper)``::

    s=1   rss >= -40
    s=k   -40-10(k-1) <= rss < -40-10(k-2)     k = 2..9
    s=10  rss < -120
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .world import NUM_ACTIONS

NUM_STATES = 10
TERMINAL_STATE = 1
# lower edges of states 1..9; below the last edge is state 10
_LOWER_EDGES = (-40.0, -50.0, -60.0, -70.0, -80.0, -90.0, -100.0, -110.0, -120.0)

DEFAULT_EPSILON = 0.1
DEFAULT_GAMMA = 0.9
DEFAULT_ALPHA_MIN = 0.2
DEFAULT_ALPHA_MAX = 0.9


class Mode(str, Enum):
    TEN_STATE = "tenstate"
    SINGLE_STATE = "singlestate"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class Fixed:
    alpha: float

    def __post_init__(self):
        _check_unit("alpha", self.alpha)

    def __str__(self):
        return f"fixed:{self.alpha:g}"


@dataclass(frozen=True)
class Varying:
    """State-dependent rate, linear in the state index: ``alpha_max`` at s=1, ``alpha_min`` at s=10."""

    alpha_min: float = DEFAULT_ALPHA_MIN
    alpha_max: float = DEFAULT_ALPHA_MAX

    def __post_init__(self):
        _check_unit("alpha_min", self.alpha_min)
        _check_unit("alpha_max", self.alpha_max)
        if self.alpha_min > self.alpha_max:
            raise ValueError(f"alpha_min {self.alpha_min} > alpha_max {self.alpha_max}")

    def __str__(self):
        return f"varying:{self.alpha_min:g}:{self.alpha_max:g}"


def parse_schedule(text):
    """Parse ``fixed:A`` or ``varying:LO:HI`` (``varying`` alone uses the defaults)."""
    parts = text.strip().lower().split(":")
    try:
        if parts[0] == "fixed" and len(parts) == 2:
            return Fixed(float(parts[1]))
        if parts[0] == "varying" and len(parts) == 1:
            return Varying()
        if parts[0] == "varying" and len(parts) == 3:
            return Varying(float(parts[1]), float(parts[2]))
    except ValueError as exc:
        raise ValueError(f"bad learning-rate schedule {text!r}: {exc}") from None
    raise ValueError(f"bad learning-rate schedule {text!r} (want fixed:A or varying:LO:HI)")


def parse_mode(text):
    try:
        return Mode(text.strip().lower())
    except ValueError:
        raise ValueError(f"bad agent mode {text!r} (want tenstate or singlestate)") from None


def _check_unit(name, value):
    if not (0.0 <= value <= 1.0):
        raise ValueError(f"{name} must be in [0, 1], got {value}")


@dataclass(frozen=True)
class AgentConfig:
    epsilon: float = DEFAULT_EPSILON
    gamma: float = DEFAULT_GAMMA
    lr_schedule: object = Varying()
    mode: Mode = Mode.TEN_STATE

    def __post_init__(self):
        _check_unit("epsilon", self.epsilon)
        _check_unit("gamma", self.gamma)
        if not isinstance(self.lr_schedule, (Fixed, Varying)):
            raise TypeError(f"lr_schedule must be Fixed or Varying, got {self.lr_schedule!r}")
        object.__setattr__(self, "mode", Mode(self.mode))


class QTable:
    """State-action values, zero-initialised.

    Indexed by the 1-based state id.  In single-state mode there is one row
    and every state id maps onto it.
    """

    def __init__(self, mode=Mode.TEN_STATE):
        self.mode = Mode(mode)
        rows = NUM_STATES if self.mode is Mode.TEN_STATE else 1
        self.values = np.zeros((rows, NUM_ACTIONS))

    def row_index(self, s):
        if not 1 <= s <= NUM_STATES:
            raise ValueError(f"state must be in 1..{NUM_STATES}, got {s}")
        return s - 1 if self.mode is Mode.TEN_STATE else 0

    def row(self, s):
        return self.values[self.row_index(s)]

    def to_csv(self):
        lines = ["state," + ",".join(f"a{a}" for a in range(NUM_ACTIONS))]
        for i, row in enumerate(self.values):
            lines.append(f"{i + 1}," + ",".join(repr(float(v)) for v in row))
        return "\n".join(lines) + "\n"


def quantize_state(rss_dbm):
    if not math.isfinite(rss_dbm):
        raise ValueError(f"RSS must be finite, got {rss_dbm}")
    for k, lower in enumerate(_LOWER_EDGES):
        if rss_dbm >= lower:
            return k + 1
    return NUM_STATES


def select_action(q, s, epsilon, rng):
    """Epsilon-greedy over row ``s``; greedy ties are broken uniformly."""
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(NUM_ACTIONS))
    row = q.row(s)
    best = np.flatnonzero(row == row.max())
    if best.size == 1:
        return int(best[0])
    return int(best[rng.integers(best.size)])


def update_q(q, s, a, r, s_next, alpha, gamma):
    """One Q-learning step: ``Q(s,a) += alpha * (r + gamma*max Q(s',.) - Q(s,a))``."""
    i = q.row_index(s)
    target = r + gamma * q.values[q.row_index(s_next)].max()
    q.values[i, a] += alpha * (target - q.values[i, a])


def learning_rate_for(schedule, s_next):
    if isinstance(schedule, Fixed):
        return schedule.alpha
    if not 1 <= s_next <= NUM_STATES:
        raise ValueError(f"state must be in 1..{NUM_STATES}, got {s_next}")
    return schedule.alpha_min + (schedule.alpha_max - schedule.alpha_min) * (NUM_STATES - s_next) / (NUM_STATES - 1)


def reward(prev_avg_rss_dbm, cur_avg_rss_dbm):
    return cur_avg_rss_dbm - prev_avg_rss_dbm


def is_terminal(s):
    return s == TERMINAL_STATE
