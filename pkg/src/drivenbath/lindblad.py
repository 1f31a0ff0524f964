"""Generic time-dependent Lindblad propagation on dense matrices.

Generators carry dissipators in the paired form D_{x,y}[rho] = x rho y
- {y x, rho}/2 with complex, possibly time-dependent rates, which covers
Lindblad dissipators (y = x^dag, rate >= 0), matrix-rate master equations
(cross terms with complex rates), and the time-local equations of this
package whose rates may legitimately turn negative.  Positivity is
monitored, never enforced.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalFailure, SolverRefusal
from .grids import TimeGrid

__all__ = [
    "HilbertSpace",
    "DensityMatrix",
    "DissipatorTerm",
    "Generator",
    "Trajectory",
    "propagate_lindblad",
    "partial_trace",
    "fidelity",
    "expectation",
    "sigma_minus",
    "sigma_z",
    "destroy_op",
]

TRACE_TOL = 1e-10
HERM_TOL = 1e-10
NEG_EIG_ERROR = -1e-8


def sigma_minus() -> np.ndarray:
    """|g><e| in the (g, e) basis."""
    return np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)


def sigma_z() -> np.ndarray:
    return np.array([[-1.0, 0.0], [0.0, 1.0]], dtype=complex)


def destroy_op(n: int) -> np.ndarray:
    """Bosonic annihilation operator truncated to n Fock levels."""
    return np.diag(np.sqrt(np.arange(1, n, dtype=float)), 1).astype(complex)


@dataclass(frozen=True)
class HilbertSpace:
    """Ordered tensor factors (dimension, label)."""

    factors: tuple

    def __post_init__(self):
        for dim, _ in self.factors:
            if dim < 1:
                raise ValueError("factor dimensions must be >= 1")

    @property
    def dim(self) -> int:
        out = 1
        for d, _ in self.factors:
            out *= d
        return out

    @property
    def labels(self) -> tuple:
        return tuple(lab for _, lab in self.factors)

    def dims(self) -> tuple:
        return tuple(d for d, _ in self.factors)

    def embed(self, label, op: np.ndarray) -> np.ndarray:
        """Lift a single-factor operator to the full space."""
        out = np.array([[1.0 + 0j]])
        hit = False
        for d, lab in self.factors:
            if lab == label:
                if op.shape != (d, d):
                    raise ValueError(f"operator shape {op.shape} != factor dim {d}")
                out = np.kron(out, op)
                hit = True
            else:
                out = np.kron(out, np.eye(d))
        if not hit:
            raise KeyError(f"no factor labelled {label!r}")
        return out


@dataclass(frozen=True)
class DensityMatrix:
    mat: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mat, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("density matrix must be square")
        if np.abs(m - m.conj().T).max() > HERM_TOL:
            raise ValueError("density matrix must be Hermitian")
        if abs(np.trace(m) - 1.0) > TRACE_TOL:
            raise ValueError("density matrix must have unit trace")
        object.__setattr__(self, "mat", m)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.mat).min())

    @classmethod
    def pure(cls, psi) -> "DensityMatrix":
        v = np.asarray(psi, dtype=complex)
        v = v / np.linalg.norm(v)
        return cls(np.outer(v, v.conj()))


@dataclass(frozen=True)
class DissipatorTerm:
    """gamma(t) * (x rho y - {y x, rho}/2); x, y, gamma may be callables of t."""

    x: object
    y: object
    rate: object = 1.0

    def at(self, t: float):
        x = self.x(t) if callable(self.x) else self.x
        y = self.y(t) if callable(self.y) else self.y
        g = self.rate(t) if callable(self.rate) else self.rate
        return x, y, complex(g)


@dataclass(frozen=True)
class Generator:
    """H(t) plus paired dissipator terms."""

    hamiltonian: object            # matrix or callable t -> matrix
    terms: tuple = ()
    dim: int | None = None

    def h_at(self, t: float) -> np.ndarray:
        H = self.hamiltonian(t) if callable(self.hamiltonian) else self.hamiltonian
        return np.asarray(H)

    def apply(self, t: float, rho: np.ndarray) -> np.ndarray:
        H = self.h_at(t)
        out = -1j * (H @ rho - rho @ H)
        for term in self.terms:
            x, y, g = term.at(t)
            yx = y @ x
            out += g * (x @ rho @ y - 0.5 * (yx @ rho + rho @ yx))
        return out

    def hermiticity_defect(self, t: float) -> float:
        H = self.h_at(t)
        return float(np.abs(H - H.conj().T).max())


@dataclass
class Trajectory:
    """Stored states/observables on a subsampled grid."""

    grid: TimeGrid
    sample_indices: np.ndarray
    states: np.ndarray                      # (n_samples, d, d)
    observables: dict = field(default_factory=dict)
    trace_drift: np.ndarray | None = None   # |tr rho - 1| at samples
    herm_fix: np.ndarray | None = None      # re-symmetrization magnitude
    min_eig: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def sample_times(self) -> np.ndarray:
        return self.grid.dt * self.sample_indices

    def observable(self, name: str) -> np.ndarray:
        return self.observables[name]


def propagate_lindblad(rho0, gen: Generator, grid: TimeGrid, *,
                       store_every: int = 1, observables: dict | None = None,
                       reduce_state=None, monitors: dict | None = None) -> Trajectory:
    """Classical RK4 on d rho/dt = L(t)[rho].

    The state is re-Hermitized each step ((rho + rho^dag)/2, magnitude
    logged); trace and minimum eigenvalue are monitored at stored samples.
    ``reduce_state`` optionally maps the full state to a reduced one before
    storage (used by the pseudo-mode solver); ``observables`` act on the
    stored (reduced) state while ``monitors`` act on the full state every
    step, reporting the running maximum.  NaN/Inf aborts with the last good
    step attached to the exception.
    """
    rho = rho0.mat.copy() if isinstance(rho0, DensityMatrix) else np.array(rho0, dtype=complex)
    dim = rho.shape[0]
    if gen.dim is not None and gen.dim != dim:
        raise SolverRefusal(f"generator dim {gen.dim} != state dim {dim}")
    h = grid.dt
    observables = observables or {}
    monitors = monitors or {}

    n_samples = grid.n_steps // store_every + 1
    sample_idx = np.arange(n_samples) * store_every
    red = reduce_state if reduce_state is not None else (lambda r: r)
    r0 = red(rho)
    states = np.empty((n_samples, r0.shape[0], r0.shape[1]), dtype=complex)
    obs_series = {k: np.empty(n_samples, dtype=complex) for k in observables}
    trace_drift = np.empty(n_samples)
    herm_fix = np.empty(n_samples)
    min_eig = np.empty(n_samples)
    monitor_max = {k: 0.0 for k in monitors}

    worst_fix = 0.0
    ks = 0
    for step in range(grid.n_steps + 1):
        for name, op in monitors.items():
            val = float(np.einsum("ij,ji->", rho, op).real)
            if val > monitor_max[name]:
                monitor_max[name] = val
        if step % store_every == 0:
            red_rho = red(rho)
            states[ks] = red_rho
            for name, op in observables.items():
                obs_series[name][ks] = np.trace(red_rho @ op)
            trace_drift[ks] = abs(np.trace(rho) - 1.0)
            herm_fix[ks] = worst_fix
            min_eig[ks] = np.linalg.eigvalsh(red_rho).min().real
            ks += 1
        if step == grid.n_steps:
            break
        t = step * h
        k1 = gen.apply(t, rho)
        k2 = gen.apply(t + h / 2, rho + (h / 2) * k1)
        k3 = gen.apply(t + h / 2, rho + (h / 2) * k2)
        k4 = gen.apply(t + h, rho + h * k3)
        rho = rho + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.isfinite(rho).all():
            partial = Trajectory(grid, sample_idx[:ks], states[:ks],
                                 {k: v[:ks] for k, v in obs_series.items()},
                                 trace_drift[:ks], herm_fix[:ks], min_eig[:ks])
            raise NumericalFailure(
                f"propagation diverged at step {step + 1} (t = {t + h:g})",
                last_good_step=step, partial=partial)
        asym = 0.5 * (rho - rho.conj().T)
        worst_fix = max(worst_fix, float(np.abs(asym).max()))
        rho = rho - asym

    traj = Trajectory(grid, sample_idx, states, obs_series,
                      trace_drift, herm_fix, min_eig)
    traj.meta["monitor_max"] = monitor_max
    return traj


def partial_trace(rho, space: HilbertSpace, keep) -> np.ndarray:
    """Reduced state over the kept factor labels (order preserved)."""
    keep = [keep] if isinstance(keep, str) else list(keep)
    dims = space.dims()
    labels = space.labels
    missing = set(keep) - set(labels)
    if missing:
        raise KeyError(f"unknown factor labels {sorted(missing)}")
    mat = rho.mat if isinstance(rho, DensityMatrix) else np.asarray(rho)
    nf = len(dims)
    resh = mat.reshape(dims + dims)
    out = resh
    # trace factors from the right so earlier axis indices stay valid
    for i in reversed(range(nf)):
        if labels[i] not in keep:
            out = np.trace(out, axis1=i, axis2=i + (out.ndim // 2))
    kept_dim = int(np.prod([d for d, lab in space.factors if lab in keep]))
    return out.reshape(kept_dim, kept_dim)


def _psd_sqrt(mat: np.ndarray, log: list | None = None) -> np.ndarray:
    ev, V = np.linalg.eigh(mat)
    if ev.min() < NEG_EIG_ERROR:
        raise ValueError(f"state has eigenvalue {ev.min():.3e} < {NEG_EIG_ERROR:.0e}; "
                         "trajectory is unphysical")
    if log is not None and ev.min() < 0:
        log.append(float(ev.min()))
    ev = np.clip(ev, 0.0, None)
    return (V * np.sqrt(ev)) @ V.conj().T


def fidelity(rho, sigma, clip_log: list | None = None) -> float:
    """Uhlmann fidelity F = (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2 in [0, 1]."""
    r = rho.mat if isinstance(rho, DensityMatrix) else np.asarray(rho)
    s = sigma.mat if isinstance(sigma, DensityMatrix) else np.asarray(sigma)
    sq = _psd_sqrt(r, clip_log)
    inner = sq @ s @ sq
    inner = 0.5 * (inner + inner.conj().T)
    ev = np.linalg.eigvalsh(inner)
    if ev.min() < NEG_EIG_ERROR:
        raise ValueError("fidelity argument strongly non-positive")
    ev = np.clip(ev, 0.0, None)
    # machine-level eigenvalues would contribute sqrt(eps)-scale noise
    ev[ev < 1e-15 * max(ev.max(), 1e-300)] = 0.0
    f = float(np.sqrt(ev).sum() ** 2)
    return min(f, 1.0)


def expectation(rho, op) -> complex:
    r = rho.mat if isinstance(rho, DensityMatrix) else np.asarray(rho)
    return complex(np.trace(r @ op))
