"""drivenbath: driven open quantum systems in structured bosonic environments."""

__version__ = "0.1.0"

from .errors import ConfigError, GridTooCoarse, NumericalFailure, SolverRefusal
from .grids import TimeGrid

__all__ = [
    "__version__",
    "ConfigError",
    "GridTooCoarse",
    "NumericalFailure",
    "SolverRefusal",
    "TimeGrid",
]
