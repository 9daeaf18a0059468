"""Q-learning UAV navigation toward an RF source under correlated Rayleigh fading."""

from .kernels import BACKEND
from .channel import ChannelParams, create_fading, path_loss_db, rss_instant
from .world import OccupancyMap, Pose, apply_action, advance, load_default_map, load_map, parse_map
from .agent import AgentConfig, Fixed, Mode, QTable, Varying
from .sim import EpisodeConfig, run_episode
from .experiment import SweepGrid, default_grid, run_sweep

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "ChannelParams", "create_fading", "path_loss_db", "rss_instant",
    "OccupancyMap", "Pose", "apply_action", "advance", "load_default_map", "load_map", "parse_map",
    "AgentConfig", "Fixed", "Mode", "QTable", "Varying", "EpisodeConfig", "run_episode",
    "SweepGrid", "default_grid", "run_sweep",
]
