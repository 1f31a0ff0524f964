"""Drive protocols: the f_i(t) terms entering f_i(t) a_i^dag + h.c.

All drives are expressed in the rotating frame; ``delta`` is the carrier
offset relative to that frame, so a monochromatic drive is A e^{-i delta t}
and a Gaussian pulse is its normalized envelope times the same phase.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grids import TimeGrid

KINDS = ("monochromatic", "gaussian", "custom")


@dataclass(frozen=True)
class DriveProtocol:
    kind: str
    amplitude: complex = 1.0
    delta: float = 0.0
    t0: float = 0.0
    sigma_l: float | None = None
    samples: np.ndarray | None = None  # custom drives, aligned to a grid
    sample_dt: float | None = None
    mode_weights: dict = field(default_factory=lambda: {0: 1.0})

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if self.kind == "gaussian":
            if self.sigma_l is None or self.sigma_l <= 0:
                raise ValueError("gaussian drive needs sigma_l > 0")
        if self.kind == "custom":
            if self.samples is None or self.sample_dt is None:
                raise ValueError("custom drive needs samples and sample_dt")

    @property
    def is_monochromatic(self) -> bool:
        return self.kind == "monochromatic"

    def envelope(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "monochromatic":
            return np.broadcast_to(np.abs(self.amplitude), t.shape).copy()
        if self.kind == "gaussian":
            s = self.sigma_l
            return np.abs(self.amplitude) / np.sqrt(2 * np.pi * s**2) * np.exp(
                -((t - self.t0) ** 2) / (2 * s**2)
            )
        idx = np.rint(t / self.sample_dt).astype(int)
        if np.any(np.abs(idx * self.sample_dt - t) > 1e-9 * self.sample_dt):
            raise ValueError("custom drive sampled off its grid")
        return np.abs(self.samples[idx])

    def scalar(self, t):
        """Complex drive f(t) before per-mode weighting."""
        t = np.asarray(t, dtype=float)
        phase = np.exp(-1j * self.delta * t)
        if self.kind == "monochromatic":
            return self.amplitude * phase
        if self.kind == "gaussian":
            s = self.sigma_l
            env = self.amplitude / np.sqrt(2 * np.pi * s**2) * np.exp(
                -((t - self.t0) ** 2) / (2 * s**2)
            )
            return env * phase
        idx = np.rint(t / self.sample_dt).astype(int)
        return self.samples[idx]

    def bandwidth(self) -> float:
        """Spectral standard deviation: 0 for monochromatic, 1/sigma_l for a pulse."""
        if self.kind == "gaussian":
            return 1.0 / self.sigma_l
        return 0.0


def drive_eval(protocol: DriveProtocol, t, n_modes: int = 1) -> np.ndarray:
    """f(t) as an N_S vector (per-mode weights applied)."""
    base = protocol.scalar(t)
    out = np.zeros((n_modes,) + np.shape(base), dtype=complex)
    for mode, weight in protocol.mode_weights.items():
        if mode >= n_modes:
            raise ValueError(f"drive assigned to mode {mode} of {n_modes}")
        out[mode] = weight * base
    return np.moveaxis(out, 0, -1)


def drive_samples(protocol: DriveProtocol | None, grid: TimeGrid, n_modes: int = 1) -> np.ndarray:
    """Drive sampled on the grid: shape (n_points, n_modes); zeros when None."""
    if protocol is None:
        return np.zeros((grid.n_points, n_modes), dtype=complex)
    return drive_eval(protocol, grid.times(), n_modes).reshape(grid.n_points, n_modes)
