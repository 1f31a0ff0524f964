"""Non-equilibrium Green function W(t) of the driven linear network.

W solves the integro-differential equation

    dW/dt + i M W + int_0^t K(t - tau) W(tau) dtau = 0,   W(0) = 1,

and its time derivative is always reported from this equation, never from
finite differences.  Four independent routes are provided: the Volterra
integrator, the direct finite-bath propagator (exact diagonalization), the
single-pole Markovian approximation, and closed forms for the Lorentzian
single-mode and two-emitter models.  Tight-binding chains get dedicated
finite-ring solvers plus a bound-state pole search.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm
from scipy.optimize import brentq
from scipy.signal import fftconvolve

from .errors import GridTooCoarse, SolverRefusal
from .grids import COARSE_THRESHOLD, TimeGrid
from .spectral import (
    DiscretizedEnvironment,
    LorentzianSpectral,
    TightBindingSpectral,
    memory_kernel,
    tb_self_energy,
)

__all__ = [
    "LinearModel",
    "GreenFunction",
    "PropagatorBlocks",
    "BoundState",
    "solve_green_volterra",
    "solve_green_direct",
    "green_lorentzian_single",
    "green_lorentzian_network",
    "green_two_emitter_lorentzian",
    "two_emitter_closed_form",
    "green_markovian",
    "green_tb_single",
    "green_tb_pair",
    "find_bound_states",
    "driven_mode_expectation",
    "wdot_winv",
]

HERMITICITY_TOL = 1e-12
SV_FLOOR = 1e-12  # singular-value floor for W inversion, relative to ||W||


@dataclass(frozen=True)
class LinearModel:
    """Quadratic composite model: system matrix M, bath spec, optional drive."""

    M: np.ndarray
    env: object
    drive: object | None = None

    def __post_init__(self):
        M = np.atleast_2d(np.asarray(self.M, dtype=complex))
        if M.shape[0] != M.shape[1]:
            raise ValueError("M must be square")
        if np.abs(M - M.conj().T).max() > HERMITICITY_TOL * max(1.0, np.abs(M).max()):
            raise ValueError("M must be Hermitian")
        object.__setattr__(self, "M", M)

    @property
    def n_modes(self) -> int:
        return self.M.shape[0]

    def fastest_scale(self) -> float:
        scale = float(np.linalg.norm(self.M, 2))
        env_scale = getattr(self.env, "fastest_scale", lambda: 0.0)()
        return max(scale, env_scale)


@dataclass
class GreenFunction:
    """W(t) and dW/dt on a grid; W[0] is the identity."""

    grid: TimeGrid
    W: np.ndarray      # (n_points, N_S, N_S)
    Wdot: np.ndarray
    stationary: bool = True  # kernel depends on t - tau only
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.grid.n_points
        if self.W.shape[0] != n or self.Wdot.shape != self.W.shape:
            raise ValueError("W/Wdot shape must match the grid")
        if np.abs(self.W[0] - np.eye(self.n_modes)).max() > 1e-9:
            raise ValueError("W(0) must be the identity")

    @property
    def n_modes(self) -> int:
        return self.W.shape[1]

    def max_singular_value(self) -> float:
        return float(np.linalg.svd(self.W, compute_uv=False).max())


@dataclass
class PropagatorBlocks:
    """System blocks of exp(-i H t) plus the eigen-decomposition of H."""

    grid: TimeGrid
    W: np.ndarray
    Wdot: np.ndarray
    eigvals: np.ndarray
    eigvecs: np.ndarray
    n_system: int
    T: np.ndarray | None = None   # (n_points, N_S, N_E) when stored
    P: np.ndarray | None = None

    def green_function(self) -> GreenFunction:
        return GreenFunction(self.grid, self.W, self.Wdot, stationary=True,
                             meta={"route": "direct"})

    def full_propagator(self, t: float) -> np.ndarray:
        ph = np.exp(-1j * self.eigvals * t)
        return (self.eigvecs * ph) @ self.eigvecs.conj().T

    def unitarity_defect(self, times) -> float:
        worst = 0.0
        dim = self.eigvecs.shape[0]
        for t in np.atleast_1d(times):
            U = self.full_propagator(float(t))
            worst = max(worst, np.abs(U.conj().T @ U - np.eye(dim)).max())
        return worst


# ---------------------------------------------------------------------------
# Volterra route
# ---------------------------------------------------------------------------


def _exp_sum_terms(model: LinearModel):
    """Kernel as sum_p A_p exp(-z_p tau), or None if no such form exists."""
    env = model.env
    n = model.n_modes
    if isinstance(env, LorentzianSpectral):
        A = env.g_se**2 * np.ones((1, n, n), dtype=complex)
        z = np.array([1j * env.eta + env.kappa], dtype=complex)
        return A, z
    if isinstance(env, DiscretizedEnvironment):
        R = env.couplings
        if R.shape[0] != n:
            raise ValueError("coupling block does not match the system size")
        A = np.einsum("ip,jp->pij", R, R.conj())
        z = 1j * env.omegas.astype(complex)
        return A, z
    return None


def _check_grid(model: LinearModel, grid: TimeGrid):
    c = grid.coarseness(model.fastest_scale())
    if c > COARSE_THRESHOLD:
        raise GridTooCoarse(
            f"dt*scale = {c:.3g} exceeds {COARSE_THRESHOLD}; "
            f"use dt <= {COARSE_THRESHOLD / model.fastest_scale():.3g}"
        )


def solve_green_volterra(model: LinearModel, grid: TimeGrid) -> GreenFunction:
    """Integrate the Volterra equation for W on a uniform grid.

    Trapezoidal quadrature for the memory integral, classical Runge-Kutta on
    the differential part; kernel values at half steps are exact (the kernel
    is evaluated, not interpolated from samples, wherever a closed form or
    exponential-sum representation exists).
    """
    _check_grid(model, grid)
    terms = _exp_sum_terms(model)
    if terms is not None:
        return _volterra_exp_sum(model, grid, *terms)
    return _volterra_generic(model, grid)


def _volterra_exp_sum(model, grid, A, z):
    n_s = model.n_modes
    h = grid.dt
    npts = grid.n_points
    M = model.M
    iM = 1j * M

    q = np.exp(-z * h)               # per-term one-step kernel decay
    qh = np.exp(-z * h / 2.0)
    eye = np.eye(n_s, dtype=complex)
    K0 = A.sum(axis=0)

    W = np.empty((npts, n_s, n_s), dtype=complex)
    Wd = np.empty_like(W)
    W[0] = eye
    Wd[0] = -iM @ eye

    # S_p = sum_{j<=n} q_p^{n-j} W_j ;  r_p = q_p^n
    S = np.repeat(eye[None, :, :], len(z), axis=0)
    r = np.ones(len(z), dtype=complex)

    def hist(Sarr, rarr, Wn, shift):
        # trapezoid over [0, t_n] with the kernel offset by `shift` steps
        base = Sarr - 0.5 * rarr[:, None, None] * W[0] - 0.5 * Wn[None]
        if shift is None:
            return h * np.einsum("pij,pjk->ik", A, base)
        return h * np.einsum("p,pij,pjk->ik", shift, A, base)

    for nstep in range(grid.n_steps):
        Wn = W[nstep]
        I0 = hist(S, r, Wn, None)

        def stage(c, Wc, qc, Kc):
            # history shifted by c*h plus the local trapezoid panel
            return hist(S, r, Wn, qc) + (c * h / 2.0) * (Kc @ Wn + K0 @ Wc)

        Kh = np.einsum("p,pij->ij", qh, A)   # K(h/2)
        K1 = np.einsum("p,pij->ij", q, A)    # K(h)

        k1 = -iM @ Wn - I0
        w2 = Wn + 0.5 * h * k1
        k2 = -iM @ w2 - stage(0.5, w2, qh, Kh)
        w3 = Wn + 0.5 * h * k2
        k3 = -iM @ w3 - stage(0.5, w3, qh, Kh)
        w4 = Wn + h * k3
        k4 = -iM @ w4 - stage(1.0, w4, q, K1)

        Wn1 = Wn + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        S = q[:, None, None] * S + Wn1[None]
        r = q * r
        W[nstep + 1] = Wn1
        Wd[nstep + 1] = -iM @ Wn1 - hist(S, r, Wn1, None)

    return GreenFunction(grid, W, Wd, meta={"route": "volterra"})


def _volterra_generic(model, grid):
    n_s = model.n_modes
    h = grid.dt
    npts = grid.n_points
    M = model.M
    iM = 1j * M

    taus = grid.times()
    Kfull = np.stack([memory_kernel(model.env, t, n_system=n_s) for t in taus])
    Khalf = np.stack([memory_kernel(model.env, t + h / 2, n_system=n_s) for t in taus])
    K0 = Kfull[0]

    W = np.empty((npts, n_s, n_s), dtype=complex)
    Wd = np.empty_like(W)
    W[0] = np.eye(n_s, dtype=complex)
    Wd[0] = -iM @ W[0]

    def hist(nstep, Kbuf):
        # trapezoid over [0, t_n]; kernel offsets (n - j)*h (+ h/2 for Kbuf=Khalf)
        Ks = Kbuf[nstep::-1]  # Ks[j] is the kernel paired with W[j]
        I = np.einsum("tij,tjk->ik", Ks, W[: nstep + 1])
        I -= 0.5 * (Ks[0] @ W[0] + Ks[-1] @ W[nstep])
        return h * I

    for nstep in range(grid.n_steps):
        Wn = W[nstep]
        I0 = hist(nstep, Kfull)

        def stage(c, Wc, Kc, Kbuf):
            return hist(nstep, Kbuf) + (c * h / 2.0) * (Kc @ Wn + K0 @ Wc)

        k1 = -iM @ Wn - I0
        w2 = Wn + 0.5 * h * k1
        k2 = -iM @ w2 - stage(0.5, w2, Khalf[0], Khalf)
        w3 = Wn + 0.5 * h * k2
        k3 = -iM @ w3 - stage(0.5, w3, Khalf[0], Khalf)
        w4 = Wn + h * k3
        # shifting the history by a full step reuses the grid kernel at n+1-j
        Ks = Kfull[nstep + 1 : 0 : -1]  # Ks[j] pairs with W[j]
        Ifull = h * (np.einsum("tij,tjk->ik", Ks, W[: nstep + 1])
                     - 0.5 * (Ks[0] @ W[0] + Ks[-1] @ W[nstep]))
        k4 = -iM @ w4 - (Ifull + (h / 2.0) * (Kfull[1] @ Wn + K0 @ w4))

        W[nstep + 1] = Wn + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        Wd[nstep + 1] = -iM @ W[nstep + 1] - hist(nstep + 1, Kfull)

    return GreenFunction(grid, W, Wd, meta={"route": "volterra-generic"})


# ---------------------------------------------------------------------------
# direct (finite bath) route
# ---------------------------------------------------------------------------

_EVAL_CHUNK = 4096


def _eig_blocks(lam, U, n_s, times, rows=None):
    """System block of exp(-i H t) and its derivative from eigen data."""
    Us = U[:n_s, :] if rows is None else U[rows, :]
    n = len(times)
    W = np.empty((n, Us.shape[0], Us.shape[0]), dtype=complex)
    Wd = np.empty_like(W)
    for a in range(0, n, _EVAL_CHUNK):
        b = min(a + _EVAL_CHUNK, n)
        ph = np.exp(-1j * np.outer(times[a:b], lam))
        W[a:b] = np.einsum("ia,ta,ja->tij", Us, ph, Us.conj())
        Wd[a:b] = np.einsum("ia,ta,ja->tij", Us, (-1j * lam) * ph, Us.conj())
    return W, Wd


def solve_green_direct(model: LinearModel, grid: TimeGrid,
                       store_blocks: bool = False) -> PropagatorBlocks:
    """Exact propagator of the finite composite model [[M, R], [R^dag, E]]."""
    env = model.env
    if not isinstance(env, DiscretizedEnvironment):
        raise SolverRefusal("direct route needs a DiscretizedEnvironment")
    n_s = model.n_modes
    n_e = env.n_modes
    dim = n_s + n_e
    H = np.zeros((dim, dim), dtype=complex)
    H[:n_s, :n_s] = model.M
    H[:n_s, n_s:] = env.couplings
    H[n_s:, :n_s] = env.couplings.conj().T
    H[np.arange(n_s, dim), np.arange(n_s, dim)] = env.omegas
    if np.abs(H.imag).max() == 0.0:
        lam, U = np.linalg.eigh(H.real)
        U = U.astype(complex)
    else:
        lam, U = np.linalg.eigh(H)

    times = grid.times()
    W, Wd = _eig_blocks(lam, U, n_s, times)
    blocks = PropagatorBlocks(grid, W, Wd, lam, U, n_s)
    if store_blocks:
        Us, Ue = U[:n_s, :], U[n_s:, :]
        ph = np.exp(-1j * np.outer(times, lam))
        blocks.T = np.einsum("ia,ta,ja->tij", Us, ph, Ue.conj())
        blocks.P = np.einsum("ia,ta,ja->tij", Ue, ph, Ue.conj())
    return blocks


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------


def _sinhc(x):
    """sinh(x)/x, stable through x -> 0 (complex-safe)."""
    x = np.asarray(x, dtype=complex)
    out = np.ones_like(x)
    small = np.abs(x) < 1e-4
    xs = x[small]
    out[small] = 1.0 + xs**2 / 6.0 + xs**4 / 120.0
    xl = x[~small]
    out[~small] = np.sinh(xl) / xl
    return out


def green_lorentzian_single(g_se: float, kappa: float, delta_bar: float,
                            grid: TimeGrid) -> GreenFunction:
    """Closed-form W for one mode in a resonant Lorentzian bath (eta = omega_S).

    W(t) = e^{-(i delta_bar + kappa/2) t} [cosh(d t) + (kappa/2d) sinh(d t)],
    d = sqrt((kappa/2)^2 - g_se^2), evaluated stably through d -> 0 and
    imaginary d (underdamped regime, |W| develops zeros).
    """
    t = grid.times()
    d2 = (kappa / 2.0) ** 2 - g_se**2
    d = np.sqrt(complex(d2))
    sh = _sinhc(d * t)                      # sinh(dt)/(dt)
    bracket = np.cosh(d * t) + (kappa / 2.0) * t * sh
    dbracket = d2 * t * sh + (kappa / 2.0) * np.cosh(d * t)
    pref = np.exp(-(1j * delta_bar + kappa / 2.0) * t)
    W = (pref * bracket)[:, None, None]
    Wd = (pref * (-(1j * delta_bar + kappa / 2.0) * bracket + dbracket))[:, None, None]
    return GreenFunction(grid, W, Wd, meta={"route": "lorentzian-closed-form",
                                            "g_se": g_se, "kappa": kappa,
                                            "delta_bar": delta_bar})


def _two_emitter_matrix(delta1, delta2, lam_c, kappa, eta_frame):
    eta_p = eta_frame - 1j * kappa
    return np.array([[delta1, 0.0, lam_c],
                     [0.0, delta2, lam_c],
                     [lam_c, lam_c, eta_p]], dtype=complex)


def green_lorentzian_network(detunings, lam_c, kappa, eta_frame,
                             grid: TimeGrid) -> GreenFunction:
    """W for n modes identically coupled to one Lorentzian bath.

    Top n x n block of exp(-i M t) where M stacks the mode detunings with
    the lossy auxiliary mode eta' = eta_frame - i kappa (coupling lambda to
    every mode).  Reduces to the single-mode closed form when eta' is
    centred on the mode.
    """
    det = np.atleast_1d(np.asarray(detunings, dtype=complex))
    n = det.shape[0]
    M = np.zeros((n + 1, n + 1), dtype=complex)
    M[np.arange(n), np.arange(n)] = det
    M[:n, n] = lam_c
    M[n, :n] = lam_c
    M[n, n] = eta_frame - 1j * kappa
    ev, V = np.linalg.eig(M)
    Vi = np.linalg.inv(V)
    t = grid.times()
    ph = np.exp(-1j * np.outer(t, ev))
    U = np.einsum("ia,ta,aj->tij", V, ph, Vi)
    Ud = np.einsum("ij,tjk->tik", -1j * M, U)
    return GreenFunction(grid, U[:, :n, :n].copy(), Ud[:, :n, :n].copy(),
                         meta={"route": "lorentzian-network"})


def green_two_emitter_lorentzian(delta1, delta2, lam_c, kappa, eta_frame,
                                 grid: TimeGrid, method: str = "eig") -> GreenFunction:
    """Two emitters sharing one Lorentzian bath: W = top 2x2 block of exp(-i M3 t).

    M3 couples both modes to the lossy auxiliary mode eta' = eta_frame - i kappa.
    `method='expm'` exponentiates per step; `method='eig'` (default) uses one
    eigendecomposition of the non-Hermitian 3x3.
    """
    M3 = _two_emitter_matrix(delta1, delta2, lam_c, kappa, eta_frame)
    t = grid.times()
    if method == "expm":
        U = np.stack([expm(-1j * M3 * tk) for tk in t])
    elif method == "eig":
        ev, V = np.linalg.eig(M3)
        Vi = np.linalg.inv(V)
        ph = np.exp(-1j * np.outer(t, ev))
        U = np.einsum("ia,ta,aj->tij", V, ph, Vi)
    else:
        raise ValueError("method must be 'expm' or 'eig'")
    Ud = np.einsum("ij,tjk->tik", -1j * M3, U)
    return GreenFunction(grid, U[:, :2, :2].copy(), Ud[:, :2, :2].copy(),
                         meta={"route": f"two-emitter-{method}"})


def two_emitter_closed_form(delta, lam_c, kappa, eta_frame, t):
    """Printed closed forms for identical detunings, with the /2 exponent fix.

    Cross-check only; the exp(-i M3 t) block is the authoritative route.
    Returns (W11, W12) arrays.
    """
    t = np.asarray(t, dtype=float)
    eta_p = eta_frame - 1j * kappa
    chi = np.sqrt((delta - eta_p) ** 2 + 8.0 * lam_c**2)
    d1 = 8.0 * lam_c**2 + (delta - eta_p) * (delta - eta_p + chi)
    d2 = 8.0 * lam_c**2 - (delta - eta_p) * (-delta + eta_p + chi)
    common = 2.0 * lam_c**2 * (np.exp(1j * t * (-delta - eta_p + chi) / 2.0) / d1
                               + np.exp(-1j * t * (delta + eta_p + chi) / 2.0) / d2)
    w11 = 0.5 * np.exp(-1j * delta * t) + common
    w12 = -0.5 * np.exp(-1j * delta * t) + common
    return w11, w12


# ---------------------------------------------------------------------------
# Markovian single-pole route
# ---------------------------------------------------------------------------


def _self_energy_matrix(model: LinearModel, z: complex) -> np.ndarray:
    env = model.env
    n = model.n_modes
    if isinstance(env, LorentzianSpectral):
        # Cauchy transform of the full-line Lorentzian, Im z >= 0 branch
        return env.g_se**2 / (z - env.eta + 1j * env.kappa) * np.ones((n, n), complex)
    if isinstance(env, TightBindingSpectral):
        sig = np.empty((n, n), dtype=complex)
        diag = tb_self_energy(env, z, n12=0)
        sig[:] = 0.0
        np.fill_diagonal(sig, diag)
        if n == 2:
            off = tb_self_energy(env, z, n12=env.n12 or 0)
            sig[0, 1] = sig[1, 0] = off
        return sig
    raise SolverRefusal(
        f"no continuum self-energy for {type(env).__name__}; "
        "use a Lorentzian or tight-binding spec"
    )


def green_markovian(model: LinearModel, grid: TimeGrid,
                    e0: float | None = None) -> GreenFunction:
    """Single-pole (flat self-energy) approximation W = exp(-i H_eff t).

    H_eff = M + Delta0 - i Gamma0/2 with Delta0, Gamma0 the Hermitian and
    anti-Hermitian parts of Sigma(E0 + i0+); E0 defaults to the mean system
    frequency.
    """
    if e0 is None:
        e0 = float(np.mean(np.linalg.eigvalsh(model.M)))
    sig = _self_energy_matrix(model, complex(e0))
    delta0 = 0.5 * (sig + sig.conj().T)
    gamma0 = 1j * (sig - sig.conj().T)
    heff = model.M + delta0 - 0.5j * gamma0
    ev, V = np.linalg.eig(heff)
    Vi = np.linalg.inv(V)
    t = grid.times()
    ph = np.exp(-1j * np.outer(t, ev))
    W = np.einsum("ia,ta,aj->tij", V, ph, Vi)
    Wd = np.einsum("ij,tjk->tik", -1j * heff, W)
    return GreenFunction(grid, W, Wd,
                         meta={"route": "markovian", "delta0": delta0,
                               "gamma0": gamma0, "e0": e0})


# ---------------------------------------------------------------------------
# tight-binding ring solvers
# ---------------------------------------------------------------------------


def _ring_guard(spec: TightBindingSpectral, grid: TimeGrid, n_env: int):
    t_rev = n_env / (4.0 * spec.J)
    if grid.t_max >= t_rev:
        raise SolverRefusal(
            f"t_max = {grid.t_max:g} reaches the ring revival guard "
            f"{t_rev:g} = N_E/(4J); enlarge n_env"
        )


def _ring_eigs(spec: TightBindingSpectral, delta_bar: float, coupling_vec):
    n_env = len(coupling_vec)
    H = np.zeros((1 + n_env, 1 + n_env))
    H[0, 0] = delta_bar
    H[0, 1:] = coupling_vec
    H[1:, 0] = coupling_vec
    idx = np.arange(n_env)
    H[1 + idx, 1 + (idx + 1) % n_env] -= spec.J
    H[1 + (idx + 1) % n_env, 1 + idx] -= spec.J
    return np.linalg.eigh(H)


def green_tb_single(spec: TightBindingSpectral, delta_bar: float,
                    grid: TimeGrid, n_env: int = 2048) -> GreenFunction:
    """Single mode attached to one chain site, via the exact finite ring."""
    _ring_guard(spec, grid, n_env)
    c = np.zeros(n_env)
    c[0] = spec.g
    lam, U = _ring_eigs(spec, delta_bar, c)
    W, Wd = _eig_blocks(lam, U.astype(complex), 1, grid.times())
    return GreenFunction(grid, W, Wd, meta={"route": "tb-ring", "n_env": n_env,
                                            "delta_bar": delta_bar})


def green_tb_pair(spec: TightBindingSpectral, delta_bar: float,
                  grid: TimeGrid, n_env: int = 2048) -> GreenFunction:
    """Two identical modes attached n12 sites apart.

    Reflection symmetry reduces the problem to collective +/- modes with
    self-energies Sigma_1D +- Sigma_12; each collective mode is solved on the
    exact finite ring and W = X diag(W+, W-) X with the Hadamard-like X.
    """
    if not spec.n12:
        raise ValueError("green_tb_pair needs a spec with n12 > 0")
    _ring_guard(spec, grid, n_env)
    scalars = []
    for sign in (+1.0, -1.0):
        c = np.zeros(n_env)
        c[0] += spec.g / np.sqrt(2.0)
        c[spec.n12 % n_env] += sign * spec.g / np.sqrt(2.0)
        lam, U = _ring_eigs(spec, delta_bar, c)
        w, wd = _eig_blocks(lam, U.astype(complex), 1, grid.times())
        scalars.append((w[:, 0, 0], wd[:, 0, 0]))
    (wp, wpd), (wm, wmd) = scalars
    n = grid.n_points
    W = np.empty((n, 2, 2), dtype=complex)
    Wd = np.empty_like(W)
    W[:, 0, 0] = W[:, 1, 1] = 0.5 * (wp + wm)
    W[:, 0, 1] = W[:, 1, 0] = 0.5 * (wp - wm)
    Wd[:, 0, 0] = Wd[:, 1, 1] = 0.5 * (wpd + wmd)
    Wd[:, 0, 1] = Wd[:, 1, 0] = 0.5 * (wpd - wmd)
    return GreenFunction(grid, W, Wd, meta={"route": "tb-ring-pair",
                                            "n_env": n_env, "w_plus": wp,
                                            "w_minus": wm})


# ---------------------------------------------------------------------------
# bound states
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundState:
    energy: float
    residue: float


def find_bound_states(spec: TightBindingSpectral, delta_bar: float,
                      window: tuple[float, float], n_scan: int = 4001,
                      sigma_sign: float = 0.0) -> list[BoundState]:
    """Real poles of [z - delta_bar - Sigma(z)]^{-1} outside the band.

    `sigma_sign` adds +-Sigma_12 for the collective modes of a pair
    (0 for a single attachment point).  Bracketing + Brent on the real
    denominator; residues from the numerical derivative of the denominator.
    """
    lo, hi = window
    if lo < -2 * spec.J < hi or lo < 2 * spec.J < hi:
        raise ValueError("search window must not cross the band edges")

    def sigma(x):
        s = tb_self_energy(spec, x, n12=0)
        if sigma_sign and spec.n12:
            s = s + sigma_sign * tb_self_energy(spec, x, n12=spec.n12)
        return s.real

    def denom(x):
        return x - delta_bar - sigma(x)

    xs = np.linspace(lo, hi, n_scan)
    vals = np.array([denom(x) for x in xs])
    sgn = np.sign(vals)
    crossings = np.where(sgn[:-1] * sgn[1:] < 0)[0]
    poles = []
    for i in crossings:
        zp = brentq(denom, xs[i], xs[i + 1], xtol=1e-14, rtol=8.9e-16)
        if abs(denom(zp)) > 1e-10:
            continue
        dz = 1e-7 * spec.J
        dprime = (denom(zp + dz) - denom(zp - dz)) / (2 * dz)
        poles.append(BoundState(energy=float(zp), residue=float(1.0 / dprime)))
    return poles


# ---------------------------------------------------------------------------
# driven expectation values and W inversion
# ---------------------------------------------------------------------------


def trapezoid_convolve(series: np.ndarray, f: np.ndarray, dt: float) -> np.ndarray:
    """int_0^t series(t - s) f(s) ds on the grid, trapezoidal weights.

    series: (n, N, N) matrices; f: (n, N) vectors; returns (n, N).
    """
    n, d = f.shape
    out = np.zeros((n, d), dtype=complex)
    for i in range(d):
        for j in range(d):
            c = fftconvolve(series[:, i, j], f[:, j])[:n] * dt
            c -= 0.5 * dt * (series[:, i, j] * f[0, j] + series[0, i, j] * f[:, j])
            out[:, i] += c
    return out


def driven_mode_expectation(green: GreenFunction, f_samples: np.ndarray,
                            a0: np.ndarray) -> np.ndarray:
    """<a(t)> = W(t) a0 - i int_0^t W(t-s) f(s) ds (vacuum bath)."""
    a0 = np.asarray(a0, dtype=complex)
    free = np.einsum("tij,j->ti", green.W, a0)
    forced = trapezoid_convolve(green.W, np.asarray(f_samples, complex), green.grid.dt)
    return free - 1j * forced


def wdot_winv(green: GreenFunction):
    """A(t) = Wdot W^{-1} with an SVD floor; returns (A, near_singular flags)."""
    n, d, _ = green.W.shape
    A = np.empty_like(green.W)
    flags = np.zeros(n, dtype=bool)
    if d == 1:
        w = green.W[:, 0, 0]
        scale = np.abs(w).max()
        flags = np.abs(w) < SV_FLOOR * scale
        safe = np.where(flags, scale, w)
        A[:, 0, 0] = green.Wdot[:, 0, 0] / safe
        return A, flags
    for k in range(n):
        u, s, vh = np.linalg.svd(green.W[k])
        floor = SV_FLOOR * s.max()
        if s.min() < floor:
            flags[k] = True
            s = np.maximum(s, floor)
        A[k] = green.Wdot[k] @ (vh.conj().T * (1.0 / s)) @ u.conj().T
    return A, flags
