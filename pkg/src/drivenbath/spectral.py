"""Environment models: spectral densities, correlation functions, memory
kernels, lattice self-energies, and discretization of continuum baths.

All frequencies are expressed in a rotating frame declared by the caller
(laser carrier for Lorentzian baths, band center for tight-binding chains).
``frame_offset`` on :class:`DiscretizedEnvironment` records lab = frame + offset
so thermal occupations can be evaluated at lab energies.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import jv

__all__ = [
    "LorentzianSpectral",
    "TightBindingSpectral",
    "DiscretizedEnvironment",
    "ThermalParams",
    "lorentzian_density",
    "lorentzian_correlation",
    "memory_kernel",
    "tb_self_energy",
    "discretize_environment",
]

# fixed small imaginary shift standing in for the +i0+ limit, in units of
# the spec's own frequency scale (J for tight binding)
IM_SHIFT = 1e-8


@dataclass(frozen=True)
class LorentzianSpectral:
    """Lorentzian spectral density J(w) = g_se^2 kappa / pi / ((w-eta)^2 + kappa^2)."""

    g_se: float
    kappa: float
    eta: float = 0.0

    def __post_init__(self):
        if not np.isfinite([self.g_se, self.kappa, self.eta]).all():
            raise ValueError("Lorentzian parameters must be finite")
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.g_se < 0:
            raise ValueError("g_se must be nonnegative")

    @property
    def gamma_fgr(self) -> float:
        """Fermi-golden-rule rate 2*pi*J(eta) = 2 g_se^2 / kappa."""
        return 2.0 * self.g_se**2 / self.kappa

    def fastest_scale(self) -> float:
        return abs(self.eta) + self.kappa


@dataclass(frozen=True)
class TightBindingSpectral:
    """Nearest-neighbour bosonic chain with periodic boundary conditions.

    Band [omega_e - 2J, omega_e + 2J]; computations run in the band-center
    frame, where the dispersion is -2J*cos(k a) and the density of states is
    D(E) = 1/(pi*sqrt(4J^2 - E^2)).
    """

    J: float
    g: float
    omega_e: float = 0.0
    n12: int | None = None  # site separation of the two attachment points

    def __post_init__(self):
        if self.J <= 0:
            raise ValueError("hopping J must be positive")
        if self.g < 0:
            raise ValueError("g must be nonnegative")
        if self.n12 is not None and (self.n12 < 0 or self.n12 != int(self.n12)):
            raise ValueError("n12 must be a nonnegative integer")

    def density_of_states(self, energy):
        """Band-center-frame D(E); zero outside the band."""
        e = np.asarray(energy, dtype=float)
        inside = np.abs(e) < 2.0 * self.J
        out = np.zeros_like(e)
        out[inside] = 1.0 / (np.pi * np.sqrt(4.0 * self.J**2 - e[inside] ** 2))
        return out if out.ndim else float(out)

    def fastest_scale(self) -> float:
        return 2.0 * self.J


@dataclass(frozen=True)
class DiscretizedEnvironment:
    """Finite mode set: frequencies and the N_S x N_E coupling block R."""

    omegas: np.ndarray
    couplings: np.ndarray
    frame_offset: float = 0.0  # lab frequency = frame frequency + offset

    def __post_init__(self):
        om = np.atleast_1d(np.asarray(self.omegas, dtype=float))
        R = np.atleast_2d(np.asarray(self.couplings, dtype=complex))
        if R.shape[1] != om.shape[0]:
            raise ValueError("couplings must be N_S x N_E")
        if not np.isfinite(om).all():
            raise ValueError("mode frequencies must be real and finite")
        object.__setattr__(self, "omegas", om)
        object.__setattr__(self, "couplings", R)

    @property
    def n_modes(self) -> int:
        return self.omegas.shape[0]

    @property
    def n_system(self) -> int:
        return self.couplings.shape[0]

    def coupling_weight(self) -> np.ndarray:
        """Sum-rule matrix sum_k R_ik R_jk^* (= integral of J_ij)."""
        return self.couplings @ self.couplings.conj().T

    def fastest_scale(self) -> float:
        return float(np.abs(self.omegas).max())


@dataclass(frozen=True)
class ThermalParams:
    """Bath temperature: beta (inverse temperature) or the vacuum."""

    beta: float | None = None

    def __post_init__(self):
        if self.beta is not None and self.beta <= 0:
            raise ValueError("beta must be positive (or None for vacuum)")

    @property
    def is_vacuum(self) -> bool:
        return self.beta is None

    @classmethod
    def vacuum(cls) -> "ThermalParams":
        return cls(beta=None)

    def occupations(self, lab_frequencies) -> np.ndarray:
        """Bose-Einstein populations at the given lab-frame frequencies."""
        w = np.asarray(lab_frequencies, dtype=float)
        if self.is_vacuum:
            return np.zeros_like(w)
        if np.any(w <= 0):
            raise ValueError("thermal occupation requires positive lab frequencies")
        return 1.0 / np.expm1(self.beta * w)


def lorentzian_density(spec: LorentzianSpectral, omega) -> float | np.ndarray:
    """J(w) of the Lorentzian bath; nonnegative everywhere."""
    w = np.asarray(omega, dtype=float)
    out = (spec.g_se**2 / np.pi) * spec.kappa / ((w - spec.eta) ** 2 + spec.kappa**2)
    return out if out.ndim else float(out)


def lorentzian_correlation(spec: LorentzianSpectral, tau) -> complex | np.ndarray:
    """C(tau) = g_se^2 exp(-i eta tau - kappa tau) for tau >= 0.

    Closed form of the full-line Fourier transform of J; the paper's
    approximation extends the frequency integral to -infinity.
    """
    t = np.asarray(tau, dtype=float)
    if np.any(t < 0):
        raise ValueError("tau must be nonnegative")
    out = spec.g_se**2 * np.exp(-(1j * spec.eta + spec.kappa) * t)
    return out if out.ndim else complex(out)


def memory_kernel(spec, tau, n_system: int | None = None) -> np.ndarray:
    """Memory kernel K(tau) = int J(w) e^{-i w tau} dw as an N_S x N_S matrix.

    For a Lorentzian with identical couplings every entry equals C(tau).
    For a tight-binding chain K_ij = g^2 i^{|d_ij|} J_{|d_ij|}(2 J tau) with
    d_ij the attachment-site separation (band-center frame).
    For a finite mode set K = R e^{-i E tau} R^dagger.
    """
    if isinstance(spec, LorentzianSpectral):
        n = 1 if n_system is None else n_system
        return lorentzian_correlation(spec, tau) * np.ones((n, n), dtype=complex)
    if isinstance(spec, TightBindingSpectral):
        if spec.n12:
            seps = np.array([[0, spec.n12], [spec.n12, 0]])
        else:
            seps = np.array([[0]])
        x = 2.0 * spec.J * float(tau)
        return spec.g**2 * (1j**seps) * jv(seps, x)
    if isinstance(spec, DiscretizedEnvironment):
        R = spec.couplings
        phases = np.exp(-1j * spec.omegas * float(tau))
        return (R * phases) @ R.conj().T
    raise TypeError(f"unsupported spectral spec {type(spec).__name__}")


def _unit_disk_root(z: complex) -> complex:
    """Root of u^2 + z u + 1 = 0 inside the unit disk (|z| scaled by J=1)."""
    rt = np.sqrt(z * z - 4.0 + 0j)
    u1 = (-z + rt) / 2.0
    u2 = (-z - rt) / 2.0
    return u1 if abs(u1) < abs(u2) else u2


def tb_self_energy(spec: TightBindingSpectral, z, n12: int = 0, side: int = +1):
    """Self-energy of system modes attached to the chain, band-center frame.

    n12 = 0 gives Sigma_1D(z) = sign(Re z) g^2 / sqrt(z^2 - 4 J^2); n12 > 0
    gives the cross self-energy for attachment points n12 sites apart.  Both
    are evaluated through the unit-disk root u0 of u^2 + (z/J)u + 1 = 0:

        Sigma(z, n) = g^2 * u0^n / (J*(u0 - 1/u0))

    which selects the physical branch (Im Sigma(E + i0+) <= 0 inside the
    band) automatically.  Real in-band z is nudged to z + i*side*IM_SHIFT*J.
    """
    J, g = spec.J, spec.g
    zc = complex(z)
    if zc.imag == 0.0:
        if min(abs(zc.real - 2 * J), abs(zc.real + 2 * J)) < 1e-12 * J:
            raise ValueError("z at a branch point +-2J")
        # in the gap the root is real and needs no regularization
        if abs(zc.real) < 2 * J:
            zc = complex(zc.real, side * IM_SHIFT * J)
    u = _unit_disk_root(zc / J)
    sig = g**2 * u**n12 / (J * (u - 1.0 / u))
    # post-hoc branch guard: the retarded branch must dissipate in band
    if zc.imag > 0 and abs(zc.real) < 2 * J and sig.imag > 0 and n12 == 0:
        sig = np.conj(sig)
    return sig


def _arctan_nodes(spec: LorentzianSpectral, n_modes: int, window, scale: float):
    """Gauss-Legendre in u = atan((w - eta)/(scale*kappa)).

    The substitution carries the exact measure J(w) dw = smooth(u) du, so the
    coupling sum rule holds to quadrature precision and nodes concentrate
    near resonance (needed for late-time propagator fidelity).
    """
    x, wts = np.polynomial.legendre.leggauss(n_modes)
    if window is None:
        umax = np.pi / 2
    else:
        half = 0.5 * (window[1] - window[0])
        umax = np.arctan(half / (scale * spec.kappa))
    u = umax * x
    om = spec.eta + scale * spec.kappa * np.tan(u)
    jac = scale * spec.kappa / np.cos(u) ** 2 * umax
    g2 = lorentzian_density(spec, om) * jac * wts
    return om, g2


def _legendre_nodes(spec: LorentzianSpectral, n_modes: int, window):
    lo, hi = window
    x, wts = np.polynomial.legendre.leggauss(n_modes)
    om = 0.5 * (hi + lo) + 0.5 * (hi - lo) * x
    g2 = lorentzian_density(spec, om) * 0.5 * (hi - lo) * wts
    return om, g2


def _lorentzian_window_weight(spec: LorentzianSpectral, window) -> float:
    """Fraction of the total spectral weight inside the window."""
    lo, hi = window
    a = np.arctan((hi - spec.eta) / spec.kappa)
    b = np.arctan((lo - spec.eta) / spec.kappa)
    return (a - b) / np.pi


def discretize_environment(
    spec,
    n_modes: int,
    window=None,
    *,
    n_system: int = 1,
    rule: str = "arctan",
    scale: float = 2.0,
    max_excluded: float = 1e-3,
) -> DiscretizedEnvironment:
    """Sample a continuum bath into a finite mode set.

    Lorentzian: Gauss-Legendre quadrature, either in the arctan-transformed
    variable over the full line (default; exact sum rule) or directly on a
    window (`rule='legendre'`).  A window excluding more than ``max_excluded``
    of the total weight is refused.

    Tight-binding: the exact finite-ring Fourier modes -2J cos(2 pi m / N)
    with couplings g/sqrt(N) and site phases for each attachment point.
    """
    if n_modes < 1:
        raise ValueError("n_modes must be >= 1")

    if isinstance(spec, LorentzianSpectral):
        if n_modes == 1:
            om = np.array([spec.eta])
            R = np.full((n_system, 1), spec.g_se, dtype=complex)
            return DiscretizedEnvironment(om, R)
        if window is not None:
            excluded = 1.0 - _lorentzian_window_weight(spec, window)
            if excluded > max_excluded:
                raise ValueError(
                    f"window excludes {excluded:.2e} of the spectral weight "
                    f"(> {max_excluded:.1e}); widen the window"
                )
        if rule == "arctan":
            om, g2 = _arctan_nodes(spec, n_modes, window, scale)
        elif rule == "legendre":
            if window is None:
                raise ValueError("legendre rule needs an explicit window")
            om, g2 = _legendre_nodes(spec, n_modes, window)
        else:
            raise ValueError(f"unknown rule {rule!r}")
        gk = np.sqrt(np.maximum(g2, 0.0))
        R = np.tile(gk, (n_system, 1)).astype(complex)
        return DiscretizedEnvironment(om, R)

    if isinstance(spec, TightBindingSpectral):
        m = np.arange(n_modes)
        k = 2.0 * np.pi * m / n_modes
        om = -2.0 * spec.J * np.cos(k)  # band-center frame
        sites = [0] if not spec.n12 else [0, spec.n12]
        R = np.empty((len(sites), n_modes), dtype=complex)
        for i, site in enumerate(sites):
            R[i] = spec.g / np.sqrt(n_modes) * np.exp(1j * k * site)
        return DiscretizedEnvironment(om, R, frame_offset=spec.omega_e)

    raise TypeError(f"unsupported spectral spec {type(spec).__name__}")
