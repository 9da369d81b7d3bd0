from .config import ConfigError, SimConfig
from .engine import Simulation, run
from .trace import SimTrace

__all__ = ["ConfigError", "SimConfig", "SimTrace", "Simulation", "run"]
