"""The four Markovian master equations compared against the exact solvers:
optical Bloch (single and collective), Floquet, time-dependent, and adiabatic.

Everything lives in the frame rotating at the laser carrier omega_L.  The
environment spectrum seen from that frame is shifted: J~(w) is the Lorentzian
re-centred at eta - omega_L with support floored at -omega_L, and the
dressed-state Lamb shift uses the closed-form principal-value integral of the
full-line approximation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .drives import DriveProtocol
from .errors import SolverRefusal
from .grids import TimeGrid
from .lindblad import DissipatorTerm, Generator, sigma_minus

__all__ = [
    "ShiftedSpectrum",
    "DressedFrame",
    "FMERates",
    "TDMEState",
    "obe_generator",
    "obe_two_emitter_generator",
    "fme_rates",
    "fme_generator",
    "tdme_generator",
    "ame_generator",
]


@dataclass(frozen=True)
class ShiftedSpectrum:
    """Lorentzian spectral density in the rotating frame.

    J~(w) = (g_se^2 kappa/pi) / ((w - (eta - omega_L))^2 + kappa^2), zero
    below the floor -omega_L (the rotated spectrum starts there).
    """

    g_se: float
    kappa: float
    eta_offset: float        # eta - omega_L
    omega_l: float = np.inf  # spectrum floor at -omega_l

    def density(self, w):
        w = np.asarray(w, dtype=float)
        out = (self.g_se**2 * self.kappa / np.pi) / (
            (w - self.eta_offset) ** 2 + self.kappa**2)
        out = np.where(w < -self.omega_l, 0.0, out)
        return out if out.ndim else float(out)

    def rate(self, w) -> float:
        """Emission rate Gamma(w) = 2 pi J~(w)."""
        return 2.0 * np.pi * self.density(w)

    def lamb_shift(self, w) -> float:
        """P int J~(x)/(w - x) dx, full-line closed form."""
        d = w - self.eta_offset
        return self.g_se**2 * d / (d**2 + self.kappa**2)


@dataclass(frozen=True)
class DressedFrame:
    """Instantaneous dressed frame of delta sigma_z + Omega_x sigma_x + Omega_y sigma_y."""

    theta: float
    phi: float
    e_plus: float

    @property
    def e_minus(self) -> float:
        return -self.e_plus

    @property
    def splitting(self) -> float:
        return 2.0 * self.e_plus

    def kets(self):
        """(|+>, |->) in the (g, e) basis; phase fixed by a real |e> component
        of |+> (the excited-state component of |+> is cos(theta/2) >= 0)."""
        c, s = np.cos(self.theta / 2), np.sin(self.theta / 2)
        ph = np.exp(-1j * self.phi)
        plus = np.array([s * ph, c], dtype=complex)    # (g, e) ordering
        minus = np.array([c * ph, -s], dtype=complex)
        return plus, minus

    @classmethod
    def from_fields(cls, delta: float, om_x: float, om_y: float) -> "DressedFrame":
        mag = np.hypot(om_x, om_y)
        if mag == 0.0 and delta == 0.0:
            theta = 0.0  # degenerate point: bare basis by convention
        else:
            theta = np.arctan2(mag, delta)
        phi = np.arctan2(om_y, om_x) if mag > 0 else 0.0
        return cls(theta=float(theta), phi=float(phi),
                   e_plus=float(np.hypot(delta, mag)))


def _two_level_fields(detuning: float, drive: DriveProtocol | None, t: float):
    """H_S(t) = delta sigma_z + Om_x sigma_x + Om_y sigma_y in the rotating frame.

    f(t) sigma_+ + f*(t) sigma_- = Re(f) sigma_x + Im(f) sigma_y, delta = Delta/2.
    """
    delta = 0.5 * detuning
    if drive is None:
        return delta, 0.0, 0.0
    f = complex(np.asarray(drive.scalar(t)).ravel()[0])
    return delta, f.real, f.imag


def _two_level_hamiltonian(delta, om_x, om_y):
    return np.array([[-delta, om_x - 1j * om_y],
                     [om_x + 1j * om_y, delta]], dtype=complex)  # (g, e) basis


# ---------------------------------------------------------------------------
# optical Bloch
# ---------------------------------------------------------------------------


def obe_generator(detuning: float, drive: DriveProtocol | None,
                  gamma_fgr: float) -> Generator:
    """H = (Delta/2) sigma_z + f(t) sigma_+ + h.c., dissipator Gamma_FGR D[sigma_-]."""
    sm = sigma_minus()
    sp = sm.conj().T

    if drive is None:
        H = _two_level_hamiltonian(0.5 * detuning, 0.0, 0.0)
        ham = H
    else:
        def ham(t):
            f = complex(np.asarray(drive.scalar(t)).ravel()[0])
            return _two_level_hamiltonian(0.5 * detuning, f.real, f.imag)

    return Generator(hamiltonian=ham,
                     terms=(DissipatorTerm(x=sm, y=sp, rate=gamma_fgr),), dim=2)


def obe_two_emitter_generator(detunings, drive: DriveProtocol | None,
                              g_se: float, kappa: float, eta_offset: float) -> Generator:
    """Collective OBE for two identical emitters in a Lorentzian bath.

    Coherent shifts J_nm = -g^2 dt~/(dt~^2 + kappa^2) and collective rates
    Gamma_nm = 2 g^2 kappa/(dt~^2 + kappa^2) with dt~ = eta - omega_L, for
    all n, m (identical couplings, zero separation).
    """
    dt_ = eta_offset
    denom = dt_**2 + kappa**2
    j_shift = -g_se**2 * dt_ / denom
    gamma = 2.0 * g_se**2 * kappa / denom

    sm = sigma_minus()
    ops = [np.kron(sm, np.eye(2)), np.kron(np.eye(2), sm)]
    dags = [op.conj().T for op in ops]

    H0 = np.zeros((4, 4), dtype=complex)
    for n, det in enumerate(detunings):
        H0 += det * (dags[n] @ ops[n])
    for n in range(2):
        for m in range(2):
            H0 += j_shift * (dags[m] @ ops[n])

    if drive is None:
        ham = H0
    else:
        def ham(t):
            f = np.asarray(drive.scalar(t)).ravel()[0]
            fv = [w * f for w in (drive.mode_weights.get(0, 0.0),
                                  drive.mode_weights.get(1, 0.0))]
            H = H0.copy()
            for n in range(2):
                H += fv[n] * dags[n] + np.conj(fv[n]) * ops[n]
            return H

    terms = tuple(DissipatorTerm(x=ops[n], y=dags[m], rate=gamma)
                  for n in range(2) for m in range(2))
    return Generator(hamiltonian=ham, terms=terms, dim=4)


# ---------------------------------------------------------------------------
# Floquet
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FMERates:
    omega_r: float
    gamma0_down: float
    gamma0_up: float
    gamma1_down: float
    gamma1_up: float
    gamma2_down: float
    gamma2_up: float


def fme_rates(detuning: float, g_sl: float, spectrum: ShiftedSpectrum,
              n_occupation=None) -> FMERates:
    """Six kinetic coefficients of the Floquet master equation.

    Omega_R = sqrt(Delta^2 + 4 g_SL^2); T = 0 unless an occupation function
    N(w) is supplied (w measured in the rotating frame).
    """
    om = np.hypot(detuning, 2.0 * g_sl)
    occ = n_occupation if n_occupation is not None else (lambda w: 0.0)

    def pair(weight, w):
        gam = spectrum.rate(w)
        n = occ(w)
        return weight * gam * (n + 1.0), weight * gam * n

    g0d, g0u = pair(g_sl**2 / om**2, 0.0)
    g1d, g1u = pair((om + detuning) ** 2 / (4 * om**2), om)
    g2d, g2u = pair((om - detuning) ** 2 / (4 * om**2), -om)
    return FMERates(om, g0d, g0u, g1d, g1u, g2d, g2u)


def fme_generator(detuning: float, drive: DriveProtocol,
                  spectrum: ShiftedSpectrum, n_occupation=None) -> Generator:
    """Floquet ME in the dressed basis of the rotated, time-independent H_S.

    Monochromatic drives only.  Dressed operators: Sigma_z dephasing at the
    carrier, Sigma_- emission at omega_L + Omega_R, Sigma_+ emission at
    omega_L - Omega_R (Mollow sidebands).
    """
    if not drive.is_monochromatic or drive.delta != 0.0:
        raise SolverRefusal("FME needs a monochromatic drive at the frame carrier")
    g_sl = abs(drive.amplitude)
    rates = fme_rates(detuning, g_sl, spectrum, n_occupation)
    om = rates.omega_r

    # dressed states |+-> of (Delta/2) sigma_z + g_SL sigma_x, (g, e) basis
    cp = np.sqrt((om + detuning) / (2 * om))
    cm = np.sqrt((om - detuning) / (2 * om))
    plus = np.array([cm, cp], dtype=complex)
    minus = np.array([cp, -cm], dtype=complex)
    sz = np.outer(plus, plus.conj()) - np.outer(minus, minus.conj())
    s_minus = np.outer(minus, plus.conj())
    s_plus = s_minus.conj().T

    H = _two_level_hamiltonian(0.5 * detuning, g_sl, 0.0)
    terms = (
        DissipatorTerm(x=sz, y=sz, rate=rates.gamma0_down + rates.gamma0_up),
        DissipatorTerm(x=s_minus, y=s_plus, rate=rates.gamma1_down),
        DissipatorTerm(x=s_plus, y=s_minus, rate=rates.gamma1_up),
        DissipatorTerm(x=s_plus, y=s_minus, rate=rates.gamma2_down),
        DissipatorTerm(x=s_minus, y=s_plus, rate=rates.gamma2_up),
    )
    return Generator(hamiltonian=H, terms=terms, dim=2)


# ---------------------------------------------------------------------------
# time-dependent / adiabatic
# ---------------------------------------------------------------------------


@dataclass
class TDMEState:
    """Per-half-step tables of U_S, jump operators, rates, and the Lamb shift."""

    grid: TimeGrid
    u_s: np.ndarray          # (2*n_steps+1, 2, 2) on the half grid
    xi_z: np.ndarray
    xi_minus: np.ndarray
    gamma_z: np.ndarray
    gamma_minus: np.ndarray
    lamb: np.ndarray         # Lamb-shift Hamiltonians
    h_s: np.ndarray
    frames: list = field(default_factory=list)

    def unitarity_defect(self) -> float:
        prods = np.einsum("tij,tkj->tik", self.u_s, self.u_s.conj())
        return float(np.abs(prods - np.eye(2)).max())


def _solve_u_s(fields, grid: TimeGrid):
    """RK4 for i dU/dt = H_S(t) U on the half grid (step dt/2)."""
    h = grid.dt / 2.0
    n_half = 2 * grid.n_steps + 1
    U = np.empty((n_half, 2, 2), dtype=complex)
    U[0] = np.eye(2)
    for m in range(n_half - 1):
        t = m * h

        def rhs(tt, u):
            return -1j * _two_level_hamiltonian(*fields(tt)) @ u

        u = U[m]
        k1 = rhs(t, u)
        k2 = rhs(t + h / 2, u + h / 2 * k1)
        k3 = rhs(t + h / 2, u + h / 2 * k2)
        k4 = rhs(t + h, u + h * k3)
        U[m + 1] = u + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return U


def _tdme_tables(detuning: float, drive: DriveProtocol | None,
                 spectrum: ShiftedSpectrum, grid: TimeGrid, adiabatic: bool):
    def fields(t):
        return _two_level_fields(detuning, drive, t)

    U = _solve_u_s(fields, grid)
    n_half = U.shape[0]
    h = grid.dt / 2.0

    d0, x0, y0 = fields(0.0)
    frame0 = DressedFrame.from_fields(d0, x0, y0)
    plus0, minus0 = frame0.kets()
    P0 = np.outer(plus0, plus0.conj())
    Z0 = P0 - np.outer(minus0, minus0.conj())
    L0 = np.outer(minus0, plus0.conj())

    xi_z = np.empty((n_half, 2, 2), dtype=complex)
    xi_m = np.empty_like(xi_z)
    lamb = np.empty_like(xi_z)
    h_s = np.empty_like(xi_z)
    g_z = np.empty(n_half)
    g_m = np.empty(n_half)
    frames = []
    for m in range(n_half):
        t = m * h
        d, x, y = fields(t)
        fr = DressedFrame.from_fields(d, x, y)
        frames.append(fr)
        c4 = np.cos(fr.theta / 2) ** 4
        g_m[m] = c4 * spectrum.rate(fr.splitting)
        g_z[m] = (np.pi / 4) * np.sin(fr.theta) ** 2 * spectrum.density(0.0)
        shift = spectrum.lamb_shift(fr.splitting) * c4
        h_s[m] = _two_level_hamiltonian(d, x, y)
        if adiabatic:
            plus, minus = fr.kets()
            Pp = np.outer(plus, plus.conj())
            xi_z[m] = Pp - np.outer(minus, minus.conj())
            xi_m[m] = np.outer(minus, plus.conj())
            lamb[m] = shift * Pp
        else:
            Um = U[m]
            xi_z[m] = Um @ Z0 @ Um.conj().T
            xi_m[m] = Um @ L0 @ Um.conj().T
            lamb[m] = shift * (Um @ P0 @ Um.conj().T)
    return TDMEState(grid, U, xi_z, xi_m, g_z, g_m, lamb, h_s, frames)


def _table_generator(state: TDMEState) -> Generator:
    h2 = state.grid.dt / 2.0
    n_half = state.u_s.shape[0]

    def index(t):
        m = int(round(t / h2))
        return min(max(m, 0), n_half - 1)

    def ham(t):
        m = index(t)
        return state.h_s[m] + state.lamb[m]

    terms = (
        DissipatorTerm(x=lambda t: state.xi_minus[index(t)],
                       y=lambda t: state.xi_minus[index(t)].conj().T,
                       rate=lambda t: state.gamma_minus[index(t)]),
        DissipatorTerm(x=lambda t: state.xi_z[index(t)],
                       y=lambda t: state.xi_z[index(t)].conj().T,
                       rate=lambda t: state.gamma_z[index(t)]),
    )
    return Generator(hamiltonian=ham, terms=terms, dim=2)


def tdme_generator(detuning: float, drive: DriveProtocol | None,
                   spectrum: ShiftedSpectrum, grid: TimeGrid):
    """Time-dependent ME: jump operators dressed at t=0 and transported by U_S.

    Gamma_- = cos^4(theta/2) 2 pi J~(E+ - E-), Gamma_z = (pi/4) sin^2(theta) J~(0),
    Lamb shift S(E+ - E-) cos^4(theta/2) on the transported |+><+| projector.
    Tables are built on the half grid so RK4 stage times hit them exactly.
    Returns (generator, TDMEState).
    """
    state = _tdme_tables(detuning, drive, spectrum, grid, adiabatic=False)
    return _table_generator(state), state


def ame_generator(detuning: float, drive: DriveProtocol | None,
                  spectrum: ShiftedSpectrum, grid: TimeGrid):
    """Adiabatic ME: same rates as the TDME, jump operators |m_t><n_t|."""
    state = _tdme_tables(detuning, drive, spectrum, grid, adiabatic=True)
    return _table_generator(state), state
