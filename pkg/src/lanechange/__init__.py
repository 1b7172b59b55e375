"""Lane-change driving stack: traffic simulator, classical planners and a
from-scratch DQN that can call a planner as one of its actions."""

from .config import ConfigError, PlannerParams, SimConfig, TrainConfig

__all__ = ["ConfigError", "PlannerParams", "SimConfig", "TrainConfig"]
__version__ = "0.1.0"
