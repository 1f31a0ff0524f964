"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A scenario/config file is malformed or internally inconsistent."""


class SolverRefusal(RuntimeError):
    """A solver declined to run (bad grid, inapplicable drive, flagged data)."""


class GridTooCoarse(SolverRefusal):
    """Time step too large for the fastest scale of the model."""


class NumericalFailure(RuntimeError):
    """Propagation produced NaN/Inf; carries the last good step index."""

    def __init__(self, message, last_good_step=None, partial=None):
        super().__init__(message)
        self.last_good_step = last_good_step
        self.partial = partial
