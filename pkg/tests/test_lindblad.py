"""Lindblad propagation, partial trace, fidelity, expectation values."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drivenbath.errors import NumericalFailure
from drivenbath.grids import TimeGrid
from drivenbath.lindblad import (
    DensityMatrix,
    DissipatorTerm,
    Generator,
    HilbertSpace,
    destroy_op,
    expectation,
    fidelity,
    partial_trace,
    propagate_lindblad,
    sigma_minus,
    sigma_z,
)

SM = sigma_minus()
SP = SM.conj().T
SZ = sigma_z()
EXCITED = DensityMatrix.pure([0.0, 1.0])


def random_density(rng, dim):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


class TestPropagate:
    def test_closed_system_matches_eigenpropagation(self):
        rng = np.random.default_rng(7)
        H = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        H = 0.5 * (H + H.conj().T)
        rho0 = random_density(rng, 3)
        grid = TimeGrid.from_t_max(5.0, 0.002)
        gen = Generator(hamiltonian=H, terms=())
        traj = propagate_lindblad(rho0, gen, grid)
        ev, V = np.linalg.eigh(H)
        t = grid.t_max
        U = (V * np.exp(-1j * ev * t)) @ V.conj().T
        expect = U @ rho0 @ U.conj().T
        assert np.abs(traj.states[-1] - expect).max() < 1e-9

    def test_qubit_decay_analytic(self):
        gamma = 0.7
        gen = Generator(hamiltonian=np.zeros((2, 2)),
                        terms=(DissipatorTerm(SM, SP, gamma),))
        grid = TimeGrid.from_t_max(6.0, 0.002)
        traj = propagate_lindblad(EXCITED, gen, grid,
                                  observables={"sigma_z": SZ})
        t = traj.sample_times
        expect = 2.0 * np.exp(-gamma * t) - 1.0
        assert np.abs(traj.observables["sigma_z"].real - expect).max() < 1e-9

    def test_rabi_frequency(self):
        g_sl = 0.35
        H = g_sl * (SM + SP)
        gen = Generator(hamiltonian=H, terms=())
        grid = TimeGrid.from_t_max(4 * np.pi / (2 * g_sl), 0.001)
        traj = propagate_lindblad(EXCITED, gen, grid,
                                  observables={"sigma_z": SZ})
        sz = traj.observables["sigma_z"].real
        expect = np.cos(2 * g_sl * traj.sample_times)
        assert np.abs(sz - expect).max() < 1e-8

    def test_trace_and_hermiticity_drift(self):
        gamma = 0.4
        gen = Generator(hamiltonian=0.9 * SZ,
                        terms=(DissipatorTerm(SM, SP, gamma),))
        grid = TimeGrid.from_t_max(20.0, 0.005)
        traj = propagate_lindblad(
            DensityMatrix.pure(np.array([1.0, 1.0]) / np.sqrt(2)), gen, grid)
        assert traj.trace_drift.max() < 1e-9 * grid.t_max
        assert traj.herm_fix.max() < 1e-10

    def test_fourth_order_convergence(self):
        # smooth driven-qubit scenario: halving dt shrinks the error ~16x
        def ham(t):
            f = 0.3 * np.exp(-((t - 3.0) ** 2) / 2.0)
            return 0.5 * SZ + f * (SM + SP)

        gen = Generator(hamiltonian=ham,
                        terms=(DissipatorTerm(SM, SP, 0.2),))
        results = {}
        for dt in (0.04, 0.02, 0.01):
            grid = TimeGrid.from_t_max(6.0, dt)
            traj = propagate_lindblad(EXCITED, gen, grid,
                                      observables={"sigma_z": SZ})
            results[dt] = traj.observables["sigma_z"][-1].real
        err_coarse = abs(results[0.04] - results[0.01])
        err_fine = abs(results[0.02] - results[0.01])
        # with Richardson spacing the ratio for a 4th-order method is
        # (16 - 1)-ish; allow a generous band around it
        assert err_coarse / err_fine > 10.0

    def test_composition_property(self):
        gamma = 0.3
        gen = Generator(hamiltonian=0.7 * SZ,
                        terms=(DissipatorTerm(SM, SP, gamma),))
        rho0 = DensityMatrix.pure(np.array([1.0, 1.0]) / np.sqrt(2))
        full = propagate_lindblad(rho0, gen, TimeGrid.from_t_max(4.0, 0.002))
        half = propagate_lindblad(rho0, gen, TimeGrid.from_t_max(2.0, 0.002))
        resumed = propagate_lindblad(half.states[-1], gen,
                                     TimeGrid.from_t_max(2.0, 0.002))
        assert np.abs(full.states[-1] - resumed.states[-1]).max() < 1e-8

    def test_negative_rate_series_propagates(self):
        # time-local equations legitimately pass through negative rates
        def rate(t):
            return 0.5 - 1.2 * np.sin(t) ** 2

        gen = Generator(hamiltonian=np.zeros((2, 2)),
                        terms=(DissipatorTerm(SM, SP, rate),))
        grid = TimeGrid.from_t_max(3.0, 0.002)
        traj = propagate_lindblad(EXCITED, gen, grid)
        assert traj.trace_drift.max() < 1e-10
        assert np.abs(traj.states[-1] - traj.states[-1].conj().T).max() < 1e-12

    def test_divergence_aborts_with_last_good_step(self):
        gen = Generator(hamiltonian=np.zeros((2, 2)),
                        terms=(DissipatorTerm(SM, SP, -200.0),))
        with np.errstate(over="ignore", invalid="ignore"):
            with pytest.raises(NumericalFailure) as err:
                propagate_lindblad(EXCITED, gen, TimeGrid.from_t_max(50.0, 0.05))
        assert err.value.last_good_step is not None
        assert err.value.partial is not None


class TestPartialTrace:
    SPACE = HilbertSpace(((2, "a"), (3, "b")))

    def test_product_state(self):
        rng = np.random.default_rng(3)
        ra = random_density(rng, 2)
        rb = random_density(rng, 3)
        rho = np.kron(ra, rb)
        assert np.abs(partial_trace(rho, self.SPACE, "a") - ra).max() < 1e-12
        assert np.abs(partial_trace(rho, self.SPACE, "b") - rb).max() < 1e-12

    def test_bell_state_reduces_to_mixed(self):
        space = HilbertSpace(((2, "q1"), (2, "q2")))
        bell = np.zeros(4, dtype=complex)
        bell[0] = bell[3] = 1 / np.sqrt(2)
        rho = np.outer(bell, bell.conj())
        red = partial_trace(rho, space, "q1")
        assert np.abs(red - np.eye(2) / 2).max() < 1e-12

    def test_trace_preserved(self):
        rng = np.random.default_rng(5)
        rho = random_density(rng, 6)
        red = partial_trace(rho, self.SPACE, "b")
        assert np.trace(red) == pytest.approx(1.0)

    def test_three_factor_keep_two(self):
        rng = np.random.default_rng(11)
        space = HilbertSpace(((2, "x"), (2, "y"), (2, "z")))
        parts = [random_density(rng, 2) for _ in range(3)]
        rho = np.kron(np.kron(parts[0], parts[1]), parts[2])
        red = partial_trace(rho, space, ["x", "z"])
        assert np.abs(red - np.kron(parts[0], parts[2])).max() < 1e-12

    def test_unknown_label_rejected(self):
        with pytest.raises(KeyError):
            partial_trace(np.eye(6) / 6, self.SPACE, "nope")


class TestFidelity:
    def test_self_fidelity(self):
        rng = np.random.default_rng(2)
        rho = random_density(rng, 4)
        assert fidelity(rho, rho) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal_pure_states(self):
        a = DensityMatrix.pure([1.0, 0.0])
        b = DensityMatrix.pure([0.0, 1.0])
        assert fidelity(a, b) == pytest.approx(0.0, abs=1e-14)

    def test_pure_state_shortcut(self):
        rng = np.random.default_rng(9)
        rho = random_density(rng, 4)
        psi = rng.normal(size=4) + 1j * rng.normal(size=4)
        psi /= np.linalg.norm(psi)
        sigma = np.outer(psi, psi.conj())
        direct = float(np.real(psi.conj() @ rho @ psi))
        assert fidelity(rho, sigma) == pytest.approx(direct, abs=1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(4)
        rho, sig = random_density(rng, 3), random_density(rng, 3)
        assert fidelity(rho, sig) == pytest.approx(fidelity(sig, rho), abs=1e-12)

    def test_strong_negativity_rejected(self):
        bad = np.diag([1.2, -0.2]).astype(complex)
        good = np.eye(2) / 2
        with pytest.raises(ValueError):
            fidelity(bad, good)

    def test_small_negativity_clipped_and_logged(self):
        eps = 5e-10
        near = np.diag([1.0 + eps, -eps]).astype(complex)
        log = []
        f = fidelity(near, np.eye(2) / 2, clip_log=log)
        assert 0.0 <= f <= 1.0
        assert log and abs(log[0]) <= 1e-9

    @given(st.integers(0, 10_000))
    @settings(max_examples=30, deadline=None)
    def test_bounds(self, seed):
        rng = np.random.default_rng(seed)
        rho, sig = random_density(rng, 3), random_density(rng, 3)
        f = fidelity(rho, sig)
        assert 0.0 <= f <= 1.0


class TestExpectation:
    def test_identity(self):
        rng = np.random.default_rng(1)
        rho = random_density(rng, 3)
        assert expectation(rho, np.eye(3)) == pytest.approx(1.0)

    def test_sigma_z_values(self):
        assert expectation(EXCITED, SZ) == pytest.approx(1.0)
        assert expectation(np.eye(2) / 2, SZ) == pytest.approx(0.0)


class TestSpaces:
    def test_embed_matches_kron(self):
        space = HilbertSpace(((2, "q"), (4, "mode")))
        a = destroy_op(4)
        assert np.abs(space.embed("mode", a) - np.kron(np.eye(2), a)).max() == 0
        assert np.abs(space.embed("q", SM) - np.kron(SM, np.eye(4))).max() == 0

    def test_dims(self):
        space = HilbertSpace(((2, "q"), (4, "mode")))
        assert space.dim == 8
        assert space.dims() == (2, 4)

    def test_density_matrix_validation(self):
        with pytest.raises(ValueError):
            DensityMatrix(np.array([[0.5, 0.2], [0.3, 0.5]]))  # not Hermitian
        with pytest.raises(ValueError):
            DensityMatrix(np.eye(2))  # trace 2
