"""Heterogeneous-agent market ecology simulator."""

__version__ = "0.1.0"

from .config import SimConfig, default_config, load_config  # noqa: E402,F401
from .engine import Simulation, SimulationError, SimulationOutput, run  # noqa: E402,F401
from .validation import stylized_report  # noqa: E402,F401
