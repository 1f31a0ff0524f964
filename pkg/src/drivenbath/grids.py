"""Uniform time grids."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

# dt * (fastest model frequency) beyond this is considered under-resolved
COARSE_THRESHOLD = 0.05


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_j = j*dt, j = 0..n_steps (n_steps+1 points)."""

    dt: float
    n_steps: int

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")

    @property
    def t_max(self) -> float:
        return self.dt * self.n_steps

    @property
    def n_points(self) -> int:
        return self.n_steps + 1

    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_steps + 1)

    @classmethod
    def from_t_max(cls, t_max: float, dt: float) -> "TimeGrid":
        return cls(dt=dt, n_steps=max(1, int(round(t_max / dt))))

    def coarseness(self, scale: float) -> float:
        """dt relative to the fastest frequency scale of the model."""
        return self.dt * abs(scale)

    def warn_if_coarse(self, scale: float, what: str = "model") -> None:
        c = self.coarseness(scale)
        if c > COARSE_THRESHOLD:
            warnings.warn(
                f"dt*{what} scale = {c:.3g} exceeds {COARSE_THRESHOLD}; "
                "results may be under-resolved",
                stacklevel=2,
            )
