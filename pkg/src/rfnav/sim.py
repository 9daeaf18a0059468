"""One navigation episode: sense RSS while flying, learn, repeat until the vicinity bin.

Epoch ``i`` spans ``[i*T_S, (i+1)*T_S)``.  At its start the agent picks an
action from the current state; the UAV flies along it at ``v`` for up to
``v*T_S`` metres, stopping short of a wall and hovering for the rest of the
epoch if the path is cut off, while the RSS is sampled every
``rss_sample_interval_s``.  An action with no room to move is blocked and a
different one is drawn at random; if all eight are blocked the UAV hovers.
At the end of the epoch the samples are averaged, smoothed over the last K
epochs, quantized to the next state, and the Q-table is updated.  The state before epoch 0 comes from a single reading at
the start position at ``t = 0``.

Every random draw (fading angles and phases, exploration, tie-breaks,
collision retries) comes from one generator seeded by ``EpisodeConfig.seed``.
"""

import io
import json
import math
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from . import agent as ag
from . import channel as ch
from . import kernels
from .world import NUM_ACTIONS, HEADINGS, STOP_CLEARANCE_M, OccupancyMap, Pose, advance, distance

DEFAULT_SAMPLE_INTERVAL_S = 1e-3
DEFAULT_SMOOTHING_EPOCHS = 3
DEFAULT_TIMEOUT_S = 3600.0
_LN10_10 = 10.0 / math.log(10.0)


class EpisodeConfig(NamedTuple):
    """All knobs for one run.

    ``fading=False`` replaces the Rayleigh process with unit gain.
    ``averaging`` selects the domain of both averaging stages: ``"linear"``
    (mW, default) or ``"db"``.
    """

    map: OccupancyMap
    velocity_mps: float
    epoch_s: float
    seed: int
    agent: ag.AgentConfig = ag.AgentConfig()
    channel: ch.ChannelParams = ch.ChannelParams()
    rss_sample_interval_s: float = DEFAULT_SAMPLE_INTERVAL_S
    smoothing_epochs: int = DEFAULT_SMOOTHING_EPOCHS
    timeout_s: float = DEFAULT_TIMEOUT_S
    fading: bool = True
    averaging: str = "linear"
    stop_clearance_m: float = STOP_CLEARANCE_M

    def validate(self):
        if not isinstance(self.map, OccupancyMap):
            raise ValueError("map must be an OccupancyMap")
        if not (math.isfinite(self.velocity_mps) and self.velocity_mps > 0):
            raise ValueError(f"velocity_mps must be > 0, got {self.velocity_mps}")
        if not (math.isfinite(self.epoch_s) and self.epoch_s > 0):
            raise ValueError(f"epoch_s must be > 0, got {self.epoch_s}")
        if not (0 < self.rss_sample_interval_s <= self.epoch_s):
            raise ValueError(f"rss_sample_interval_s must be in (0, epoch_s], got {self.rss_sample_interval_s}")
        if int(self.smoothing_epochs) != self.smoothing_epochs or self.smoothing_epochs < 1:
            raise ValueError(f"smoothing_epochs must be an integer >= 1, got {self.smoothing_epochs}")
        if not self.timeout_s > self.epoch_s:
            raise ValueError(f"timeout_s must exceed epoch_s, got {self.timeout_s}")
        if not (isinstance(self.seed, (int, np.integer)) and 0 <= self.seed < 2 ** 64):
            raise ValueError(f"seed must be an integer in [0, 2**64), got {self.seed!r}")
        if not (math.isfinite(self.stop_clearance_m) and self.stop_clearance_m > 0):
            raise ValueError(f"stop_clearance_m must be > 0, got {self.stop_clearance_m}")
        if self.averaging not in ("linear", "db"):
            raise ValueError(f"averaging must be 'linear' or 'db', got {self.averaging!r}")
        return self

    @property
    def samples_per_epoch(self):
        return max(1, math.floor(self.epoch_s / self.rss_sample_interval_s + 1e-9))

    def echo(self):
        a = self.agent
        return {
            "map": self.map.name,
            "velocity_mps": self.velocity_mps,
            "epoch_s": self.epoch_s,
            "rss_sample_interval_s": self.rss_sample_interval_s,
            "smoothing_epochs": self.smoothing_epochs,
            "epsilon": a.epsilon,
            "gamma": a.gamma,
            "schedule": str(a.lr_schedule),
            "mode": str(a.mode),
            "tx_power_dbm": self.channel.tx_power_dbm,
            "carrier_hz": self.channel.carrier_hz,
            "seed": int(self.seed),
            "timeout_s": self.timeout_s,
            "fading": self.fading,
            "averaging": self.averaging,
            "stop_clearance_m": self.stop_clearance_m,
        }


class StepRecord(NamedTuple):
    """One decision epoch.

    ``time_s`` is the epoch start; ``pose`` and ``true_distance_m`` are where
    the UAV is at the epoch end.  ``action`` is the action executed (the
    epsilon-greedy choice if every action was blocked and the UAV held);
    ``retried_actions`` counts re-draws after the first candidate was blocked.
    ``state`` is the quantized smoothed RSS, i.e. the next state.
    """

    epoch_index: int
    time_s: float
    pose: Pose
    action: int
    retried_actions: int
    raw_epoch_rss_dbm: float
    smoothed_rss_dbm: float
    state: int
    reward: float
    alpha_used: float
    true_distance_m: float


@dataclass(frozen=True)
class Converged:
    time_s: float
    final_distance_m: float


@dataclass(frozen=True)
class TimedOut:
    time_s: float


@dataclass
class EpisodeLog:
    config: EpisodeConfig
    steps: list = field(default_factory=list)
    outcome: object = None
    num_epochs: int = 0
    q_table: Optional[ag.QTable] = None

    @property
    def converged(self):
        return isinstance(self.outcome, Converged)

    def to_jsonl(self):
        buf = io.StringIO()
        write_log(self, buf)
        return buf.getvalue()


def _to_db(mw):
    return 10.0 * math.log10(mw)


def epoch_average_rss(samples, averaging="linear"):
    """Average a non-empty sequence of :class:`RssSample` (or dBm floats)."""
    values = [s.rss_dbm if isinstance(s, ch.RssSample) else float(s) for s in samples]
    if not values:
        raise ValueError("cannot average an empty sample sequence")
    return _mean_dbm(values, averaging)


def smoothed_rss(history, k=DEFAULT_SMOOTHING_EPOCHS, averaging="linear"):
    """Average of the last ``min(k, len(history))`` epoch averages (dBm)."""
    if not history:
        raise ValueError("smoothing needs at least one epoch average")
    if k < 1:
        raise ValueError(f"window must be >= 1, got {k}")
    return _mean_dbm(list(history)[-k:], averaging)


def _mean_dbm(values, averaging):
    if len(values) == 1:
        return float(values[0])
    if averaging == "db":
        return math.fsum(values) / len(values)
    return _to_db(math.fsum(10.0 ** (v / 10.0) for v in values) / len(values))


def run_episode(config, *, record_steps=True, backend=None):
    """Run Q-learning navigation for one seeded episode."""
    config.validate()
    k = kernels.resolve(backend)
    occ = config.map
    ac = config.agent
    rng = np.random.default_rng(int(config.seed))
    if config.fading:
        fading = ch.create_fading(config.velocity_mps, config.channel, int(rng.integers(2 ** 63)))
    else:
        fading = ch.unit_fading()
    omega, phases = fading.omega, fading.phases
    faded = bool(fading.enabled)
    log_domain = config.averaging == "db"

    dt = config.rss_sample_interval_s
    n = config.samples_per_epoch
    epoch_s = config.epoch_s
    step_len = config.velocity_mps * epoch_s
    src = occ.source_xy
    ptx_mw = config.channel.tx_power_mw

    def epoch_rss(t0, p, vx, vy, samples):
        m = k.epoch_mean_power(omega, phases, t0, dt, samples, p[0], p[1], vx, vy, src[0], src[1],
                               ptx_mw, ch.PL_INTERCEPT_DB, ch.PL_SLOPE_DB, ch.D_MIN_M, faded, log_domain)
        return m * _LN10_10 if log_domain else _to_db(m)

    def flown_rss(t0, p, a, travelled):
        # fly at full speed until the stop point, then hover for the rest of the epoch
        hx, hy = HEADINGS[a]
        v = config.velocity_mps
        if travelled >= step_len:
            return epoch_rss(t0, p, v * hx, v * hy, n)
        n_fly = min(n, math.floor(travelled / (v * dt) + 1e-9) + 1)
        m_fly = k.epoch_mean_power(omega, phases, t0, dt, n_fly, p[0], p[1], v * hx, v * hy, src[0], src[1],
                                   ptx_mw, ch.PL_INTERCEPT_DB, ch.PL_SLOPE_DB, ch.D_MIN_M, faded, log_domain)
        if n_fly == n:
            m = m_fly
        else:
            stop = (p[0] + travelled * hx, p[1] + travelled * hy)
            m_hover = k.epoch_mean_power(omega, phases, t0 + n_fly * dt, dt, n - n_fly, stop[0], stop[1], 0.0, 0.0,
                                         src[0], src[1], ptx_mw, ch.PL_INTERCEPT_DB, ch.PL_SLOPE_DB, ch.D_MIN_M,
                                         faded, log_domain)
            m = (m_fly * n_fly + m_hover * (n - n_fly)) / n
        return m * _LN10_10 if log_domain else _to_db(m)

    def try_move(p, a):
        return advance(occ, p, a, step_len, config.stop_clearance_m, k)

    q = ag.QTable(ac.mode)
    pose = occ.start_xy
    s = ag.quantize_state(epoch_rss(0.0, pose, 0.0, 0.0, 1))
    history = deque(maxlen=config.smoothing_epochs)
    prev_smoothed = None
    log = EpisodeLog(config=config)
    outcome = None
    i = 0
    while (i + 1) * epoch_s <= config.timeout_s * (1 + 1e-12):
        t0 = i * epoch_s
        a = ag.select_action(q, s, ac.epsilon, rng)
        move = try_move(pose, a)
        retried = 0
        if move is None:
            untried = [b for b in range(NUM_ACTIONS) if b != a]
            while move is None and untried:
                b = untried.pop(int(rng.integers(len(untried))))
                retried += 1
                move = try_move(pose, b)
                if move is not None:
                    a = b
        if move is None:
            new_pose = pose
            raw = epoch_rss(t0, pose, 0.0, 0.0, n)
        else:
            new_pose = move.pose
            raw = flown_rss(t0, pose, a, move.travelled_m)
        history.append(raw)
        smoothed = _mean_dbm(history, config.averaging)
        s_next = ag.quantize_state(smoothed)
        r = 0.0 if prev_smoothed is None else ag.reward(prev_smoothed, smoothed)
        alpha = ag.learning_rate_for(ac.lr_schedule, s_next)
        ag.update_q(q, s, a, r, s_next, alpha, ac.gamma)

        pose = new_pose
        if record_steps:
            log.steps.append(StepRecord(
                epoch_index=i, time_s=t0, pose=pose, action=a, retried_actions=retried,
                raw_epoch_rss_dbm=raw, smoothed_rss_dbm=smoothed, state=s_next, reward=r,
                alpha_used=alpha, true_distance_m=distance(pose, src),
            ))
        prev_smoothed = smoothed
        s = s_next
        i += 1
        if ag.is_terminal(s):
            outcome = Converged(time_s=i * epoch_s, final_distance_m=distance(pose, src))
            break
    if outcome is None:
        outcome = TimedOut(time_s=i * epoch_s)
    log.outcome = outcome
    log.num_epochs = i
    log.q_table = q
    return log


def _step_obj(rec):
    d = rec._asdict()
    d["pose"] = {"x_m": rec.pose[0], "y_m": rec.pose[1]}
    return d


def _outcome_obj(outcome):
    if isinstance(outcome, Converged):
        return {"outcome": "converged", "time_s": outcome.time_s, "final_distance_m": outcome.final_distance_m}
    return {"outcome": "timed_out", "time_s": outcome.time_s}


def write_log(log, sink):
    """Line-delimited JSON: config echo, one object per step, then the outcome."""
    dump = json.dumps
    sink.write(dump({"config": log.config.echo()}) + "\n")
    for rec in log.steps:
        sink.write(dump(_step_obj(rec)) + "\n")
    sink.write(dump(_outcome_obj(log.outcome)) + "\n")


def read_log(source):
    """Parse :func:`write_log` output into ``(config_echo, steps, outcome)`` dicts."""
    lines = [json.loads(line) for line in source if line.strip()]
    if len(lines) < 2 or "config" not in lines[0] or "outcome" not in lines[-1]:
        raise ValueError("not an episode log")
    return lines[0]["config"], lines[1:-1], lines[-1]
