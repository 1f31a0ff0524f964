"""Time-dependent coefficients of the exact linear master equation.

From the Green function W(t) and its derivative:

    A(t)      = Wdot W^{-1}
    Gamma_dn  = Vdot - A (V + 1) - (V + 1) A^dag
    Gamma_up  = Vdot - A V - V A^dag
    Omega     = (i/2) (A - A^dag)
    k(t)      = f(t) + f_NM(t)
    f_NM(t)   = int_0^t Wdot(t-tau) f(tau) dtau - A(t) int_0^t W(t-tau) f(tau) dtau

with V(t) = T(t) n_BE T(t)^dag the thermal occupation matrix (zero in
vacuum).  Steps where W is numerically singular are flagged, not repaired;
Gamma_dn may legitimately turn negative between zeros of |W| (time-local
form), and is propagated as-is downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import fftconvolve

from .errors import SolverRefusal
from .green import GreenFunction, trapezoid_convolve, wdot_winv
from .grids import TimeGrid
from .lindblad import DissipatorTerm, Generator, destroy_op, sigma_minus
from .spectral import DiscretizedEnvironment, ThermalParams

__all__ = [
    "LMECoefficients",
    "compute_lme_coefficients",
    "compute_f_nm",
    "build_lme_generator",
    "attach_drive",
]


@dataclass(frozen=True)
class LMECoefficients:
    grid: TimeGrid
    gamma_down: np.ndarray        # (n, N_S, N_S)
    gamma_up: np.ndarray
    omega: np.ndarray
    flags: np.ndarray             # per-step near-singular-W markers
    k: np.ndarray | None = None   # (n, N_S): f + f_NM once a drive is attached
    f_nm: np.ndarray | None = None

    @property
    def n_modes(self) -> int:
        return self.gamma_down.shape[1]


def compute_lme_coefficients(green: GreenFunction, model=None,
                             thermal: ThermalParams = ThermalParams.vacuum()
                             ) -> LMECoefficients:
    """Rates and the coherent matrix from W; thermal V needs a finite bath.

    In vacuum V = 0, Gamma_up = 0.  For beta < inf the model must carry a
    DiscretizedEnvironment so T(t) = -i int W(t-tau) R e^{-i E tau} dtau is
    computable; occupations are evaluated at lab frequencies via the bath's
    frame offset.
    """
    A, flags = wdot_winv(green)
    Ad = A.conj().transpose(0, 2, 1)
    n, d, _ = A.shape
    eye = np.eye(d)

    if thermal.is_vacuum:
        gamma_down = -(A + Ad)
        gamma_up = np.zeros_like(A)
    else:
        env = getattr(model, "env", None)
        if not isinstance(env, DiscretizedEnvironment):
            raise SolverRefusal("thermal coefficients need a DiscretizedEnvironment")
        V, Vdot = _occupation_matrix(green, env, thermal)
        gamma_down = Vdot - np.einsum("tij,tjk->tik", A, V + eye) \
            - np.einsum("tij,tjk->tik", V + eye, Ad)
        gamma_up = Vdot - np.einsum("tij,tjk->tik", A, V) \
            - np.einsum("tij,tjk->tik", V, Ad)
    omega = 0.5j * (A - Ad)
    return LMECoefficients(green.grid, gamma_down, gamma_up, omega, flags)


def _occupation_matrix(green: GreenFunction, env: DiscretizedEnvironment,
                       thermal: ThermalParams):
    """V(t) = T n_BE T^dag and its derivative on the grid."""
    grid = green.grid
    ts = grid.times()
    n, d = grid.n_points, green.n_modes
    R = env.couplings
    n_be = thermal.occupations(env.omegas + env.frame_offset)

    T = np.empty((n, d, env.n_modes), dtype=complex)
    Tdot = np.empty_like(T)
    for k in range(env.n_modes):
        fk = np.outer(np.exp(-1j * env.omegas[k] * ts), R[:, k])
        T[:, :, k] = -1j * trapezoid_convolve(green.W, fk, grid.dt)
        Tdot[:, :, k] = -1j * (fk + trapezoid_convolve(green.Wdot, fk, grid.dt))
    V = np.einsum("tik,k,tjk->tij", T, n_be, T.conj())
    Vdot = np.einsum("tik,k,tjk->tij", Tdot, n_be, T.conj())
    Vdot += Vdot.conj().transpose(0, 2, 1)
    return V, Vdot


def compute_f_nm(green: GreenFunction, f_samples: np.ndarray):
    """Non-Markovian drive correction f_NM(t); returns (series, flags).

    Requires a stationary kernel (W(t, tau) = W(t - tau)); asserted, not
    silently assumed.  Both integrals share one trapezoidal discretization so
    the exponential-W cancellation is exact to roundoff.
    """
    if not green.stationary:
        raise SolverRefusal("f_NM needs a time-translation-invariant kernel")
    f = np.asarray(f_samples, dtype=complex)
    if f.ndim == 1:
        f = f[:, None]
    A, flags = wdot_winv(green)
    conv_d = trapezoid_convolve(green.Wdot, f, green.grid.dt)
    conv_w = trapezoid_convolve(green.W, f, green.grid.dt)
    f_nm = conv_d - np.einsum("tij,tj->ti", A, conv_w)
    return f_nm, flags


def attach_drive(coeffs: LMECoefficients, green: GreenFunction,
                 f_samples: np.ndarray) -> LMECoefficients:
    """Return coefficients with k = f + f_NM filled in."""
    f = np.asarray(f_samples, dtype=complex)
    if f.ndim == 1:
        f = f[:, None]
    f_nm, flags = compute_f_nm(green, f)
    return replace(coeffs, k=f + f_nm, f_nm=f_nm,
                   flags=coeffs.flags | flags)


def _interp_series(ts, series):
    """Linear interpolation of a complex time series, clamped at the ends."""
    def value(t):
        return np.interp(t, ts, series.real) + 1j * np.interp(t, ts, series.imag)
    return value


def build_lme_generator(coeffs: LMECoefficients, target: str = "emitters",
                        n_fock: int | None = None,
                        window: tuple[float, float] | None = None) -> Generator:
    """Assemble the propagatable generator from coefficient series.

    target='emitters' maps mode i to the lowering operator of qubit i on the
    2^N_S space; target='bosonic' uses truncated annihilation operators on
    Fock(n_fock)^N_S.  Refuses if the requested window contains flagged steps.
    """
    ts = coeffs.grid.times()
    if window is None:
        window = (ts[0], ts[-1])
    in_window = (ts >= window[0]) & (ts <= window[1])
    if np.any(coeffs.flags & in_window):
        t_bad = ts[coeffs.flags & in_window][0]
        raise SolverRefusal(f"near-singular W at t = {t_bad:g} inside the window")

    d = coeffs.n_modes
    if target == "emitters":
        ops = []
        for i in range(d):
            op = np.array([[1.0 + 0j]])
            for j in range(d):
                op = np.kron(op, sigma_minus() if j == i else np.eye(2))
            ops.append(op)
    elif target == "bosonic":
        if n_fock is None or n_fock < 2:
            raise ValueError("bosonic target needs n_fock >= 2")
        a = destroy_op(n_fock)
        ops = []
        for i in range(d):
            op = np.array([[1.0 + 0j]])
            for j in range(d):
                op = np.kron(op, a if j == i else np.eye(n_fock))
            ops.append(op)
    else:
        raise ValueError("target must be 'emitters' or 'bosonic'")
    dags = [op.conj().T for op in ops]

    omega_fns = [[_interp_series(ts, coeffs.omega[:, i, j]) for j in range(d)]
                 for i in range(d)]
    if coeffs.k is not None:
        k_fns = [_interp_series(ts, coeffs.k[:, i]) for i in range(d)]
    else:
        k_fns = None

    def hamiltonian(t):
        H = np.zeros_like(ops[0])
        for i in range(d):
            for j in range(d):
                H = H + omega_fns[i][j](t) * (dags[i] @ ops[j])
        if k_fns is not None:
            for i in range(d):
                ki = k_fns[i](t)
                H = H + ki * dags[i] + np.conj(ki) * ops[i]
        return H

    terms = []
    for i in range(d):
        for j in range(d):
            terms.append(DissipatorTerm(
                x=ops[j], y=dags[i],
                rate=_interp_series(ts, coeffs.gamma_down[:, i, j])))
            if np.abs(coeffs.gamma_up[:, i, j]).max() > 0:
                terms.append(DissipatorTerm(
                    x=dags[i], y=ops[j],
                    rate=_interp_series(ts, coeffs.gamma_up[:, i, j])))
    return Generator(hamiltonian=hamiltonian, terms=tuple(terms),
                     dim=ops[0].shape[0])
