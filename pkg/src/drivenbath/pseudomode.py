"""Exact reference solver: emitters + one dissipative pseudo-mode.

A Lorentzian bath J(w) = g_se^2 kappa/pi / ((w-eta)^2 + kappa^2) acting on
identically coupled emitters is reproduced exactly by a single auxiliary
bosonic mode c at frequency eta with coupling lambda = g_se and dissipator
2 kappa D_{c, c^dag}; the two-time function of the construction,
lambda^2 e^{-i eta t - kappa t}, equals the bath correlation function by
construction.  The bath starts in vacuum (finite temperature out of scope).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .drives import DriveProtocol, drive_eval
from .grids import TimeGrid
from .lindblad import (
    DissipatorTerm,
    Generator,
    HilbertSpace,
    Trajectory,
    destroy_op,
    propagate_lindblad,
    sigma_minus,
)

__all__ = ["PseudoModeModel", "estimate_truncation", "solve_pseudomode"]

TOP_FOCK_LIMIT = 1e-6  # highest-level population above this flags under-truncation


@dataclass(frozen=True)
class PseudoModeModel:
    n_emitters: int
    M: np.ndarray                 # emitter coupling/detuning matrix (frame)
    lam: float                    # = g_se
    kappa: float
    eta: float                    # pseudo-mode frequency in the frame
    n_trunc: int
    drive: DriveProtocol | None = None

    def __post_init__(self):
        M = np.atleast_2d(np.asarray(self.M, dtype=complex))
        if M.shape != (self.n_emitters, self.n_emitters):
            raise ValueError("M must be n_emitters x n_emitters")
        object.__setattr__(self, "M", M)
        if self.n_trunc < 2:
            raise ValueError("n_trunc must be >= 2")
        if self.lam < 0 or self.kappa <= 0:
            raise ValueError("need lam >= 0 and kappa > 0")

    def space(self) -> HilbertSpace:
        factors = tuple((2, f"emitter{i}") for i in range(self.n_emitters))
        return HilbertSpace(factors + ((self.n_trunc, "pseudomode"),))


def estimate_truncation(g_se: float, g_sl: float, kappa: float) -> int:
    """Fock levels for the pseudo-mode: ceil(g_se g_sl / (kappa sqrt(g_se^2+g_sl^2)))
    plus a safety margin of 3, floored at 4."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    if g_se == 0.0 and g_sl == 0.0:
        base = 0
    else:
        base = math.ceil(g_se * g_sl / (kappa * math.hypot(g_se, g_sl)))
    return max(4, base + 3)


def build_pseudomode_generator(model: PseudoModeModel) -> Generator:
    """H_SR(t) = H_S(t) + lambda (S c^dag + S^dag c) + eta c^dag c, plus 2 kappa D[c]."""
    space = model.space()
    sms = [space.embed(f"emitter{i}", sigma_minus()) for i in range(model.n_emitters)]
    c = space.embed("pseudomode", destroy_op(model.n_trunc))
    cd = c.conj().T

    H0 = np.zeros((space.dim, space.dim), dtype=complex)
    for i in range(model.n_emitters):
        for j in range(model.n_emitters):
            if model.M[i, j] != 0:
                H0 += model.M[i, j] * (sms[i].conj().T @ sms[j])
    S = sum(sms)
    H0 += model.lam * (S @ cd + S.conj().T @ c)
    H0 += model.eta * (cd @ c)

    if model.drive is None:
        ham = H0
    else:
        drive = model.drive
        n_em = model.n_emitters
        sps = [sm.conj().T for sm in sms]

        def ham(t):
            f = drive_eval(drive, t, n_em)
            H = H0.copy()
            for i in range(n_em):
                H += f[i] * sps[i] + np.conj(f[i]) * sms[i]
            return H

    return Generator(hamiltonian=ham,
                     terms=(DissipatorTerm(x=c, y=cd, rate=2.0 * model.kappa),),
                     dim=space.dim)


def solve_pseudomode(model: PseudoModeModel, rho0_emitters, grid: TimeGrid, *,
                     store_every: int = 1, observables: dict | None = None) -> Trajectory:
    """Propagate emitters x pseudo-mode from bath vacuum; return reduced states.

    Observables act on the emitter space.  The top Fock level is monitored at
    every step; a run whose top-level population ever exceeds 1e-6 is flagged
    ``under_truncated`` in the trajectory metadata.
    """
    gen = build_pseudomode_generator(model)
    rho_em = rho0_emitters.mat if hasattr(rho0_emitters, "mat") else np.asarray(rho0_emitters)
    nt = model.n_trunc
    vac = np.zeros((nt, nt), dtype=complex)
    vac[0, 0] = 1.0
    rho0 = np.kron(rho_em, vac)

    d_em = 2**model.n_emitters

    def reduce_state(rho):
        return rho.reshape(d_em, nt, d_em, nt).trace(axis1=1, axis2=3)

    top = np.zeros(nt)
    top[-1] = 1.0
    top_proj = np.kron(np.eye(d_em), np.diag(top)).astype(complex)

    traj = propagate_lindblad(rho0, gen, grid, store_every=store_every,
                              observables=observables,
                              reduce_state=reduce_state,
                              monitors={"top_fock": top_proj})
    top_max = traj.meta["monitor_max"]["top_fock"]
    traj.meta["top_fock_max"] = top_max
    traj.meta["under_truncated"] = bool(top_max > TOP_FOCK_LIMIT)
    traj.meta["n_trunc"] = nt
    return traj
