"""Spectral time evolution, fidelity frames, observables and scaling fits."""

import math

import numpy as np
import pytest

from effham.deformed import (
    Su2HamiltonianSpec,
    build_module,
    cubic_structural,
    effective_order1,
    interaction_hamiltonian,
    small_rotation,
    spin_structural,
)
from effham.dynamics import (
    TimeGrid,
    eigenvalue_compare,
    effective_support,
    evolve,
    fidelity_series,
    observables,
    scaling_study,
)
from effham.multilevel import (
    CascadeModelSpec,
    build_full_h,
    excitation_operator,
    product_state,
    sector_of_product_state,
)
from effham.operators import Operator


class TestTimeGrid:
    def test_rejects_descending(self):
        with pytest.raises(ValueError):
            TimeGrid(np.array([0.0, 2.0, 1.0]))

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            TimeGrid(np.array([-1.0, 0.0]))

    def test_linspace(self):
        grid = TimeGrid.linspace(5.0, 11)
        assert len(grid) == 11
        assert grid.times[-1] == 5.0


class TestEvolve:
    def test_eigenvector_acquires_phase_only(self):
        h = Operator(np.diag([1.0, 2.0]).astype(complex), "t")
        psi0 = np.array([1.0, 0.0], dtype=complex)
        states = evolve(h, psi0, TimeGrid.linspace(6.0, 13))
        overlap = np.abs(states @ psi0.conj())
        assert np.allclose(overlap, 1.0, atol=1e-12)

    def test_rabi_oscillation(self):
        g = 0.3
        h = Operator(np.array([[0.0, g], [g, 0.0]], dtype=complex), "t")
        psi0 = np.array([1.0, 0.0], dtype=complex)
        t_half = math.pi / (2.0 * g)  # population fully transfers at gt = π/2
        states = evolve(h, psi0, TimeGrid(np.array([0.0, t_half, 2 * t_half])))
        assert abs(states[1][1]) == pytest.approx(1.0, abs=1e-12)
        assert abs(states[2][0]) == pytest.approx(1.0, abs=1e-12)

    def test_norm_preserved_long_times(self):
        rng = np.random.default_rng(12)
        raw = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
        h = Operator((raw + raw.conj().T) / 2, "t")
        psi0 = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        psi0 /= np.linalg.norm(psi0)
        # ~10⁴ coupling periods at unit scale
        grid = TimeGrid(np.array([0.0, 1.0, 1e2, 1e4 * 2 * math.pi]))
        states = evolve(h, psi0, grid)
        assert np.max(np.abs(np.linalg.norm(states, axis=1) - 1.0)) < 1e-10

    def test_rejects_unnormalised(self):
        h = Operator(np.eye(2, dtype=complex), "t")
        with pytest.raises(ValueError, match="normalised"):
            evolve(h, np.array([1.0, 1.0]), TimeGrid.linspace(1.0, 3))


class TestFidelitySeries:
    def test_identical_hamiltonians(self):
        rng = np.random.default_rng(4)
        raw = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
        h = Operator((raw + raw.conj().T) / 2, "t")
        psi0 = np.zeros(5, dtype=complex)
        psi0[2] = 1.0
        rep = fidelity_series(h, h, psi0, TimeGrid.linspace(20.0, 41))
        assert rep.min_fidelity == pytest.approx(1.0, abs=1e-12)

    def test_frame_correction_starts_at_one(self):
        mod = build_module(spin_structural(1.5), -1.5, 4)
        spec = Su2HamiltonianSpec(1.0, 0.08, mod)
        h = interaction_hamiltonian(spec)
        heff = effective_order1(spec)
        psi0 = np.zeros(4, dtype=complex)
        psi0[1] = 1.0
        rep = fidelity_series(
            h, heff, psi0, TimeGrid.linspace(30.0, 61), frame=small_rotation(spec)
        )
        assert rep.fidelity[0] == pytest.approx(1.0, abs=1e-12)
        assert np.all(rep.fidelity <= 1.0 + 1e-12)

    def test_frame_correction_beats_bare(self):
        mod = build_module(spin_structural(1.5), -1.5, 4)
        spec = Su2HamiltonianSpec(1.0, 0.08, mod)
        h = interaction_hamiltonian(spec)
        heff = effective_order1(spec)
        psi0 = np.zeros(4, dtype=complex)
        psi0[1] = 1.0
        grid = TimeGrid.linspace(30.0, 121)
        corrected = fidelity_series(h, heff, psi0, grid, frame=small_rotation(spec))
        bare = fidelity_series(h, heff, psi0, grid)
        assert corrected.min_fidelity > bare.min_fidelity
        # the bare frame shows the first-order fidelity floor of the rotation
        assert 1.0 - bare.min_fidelity >= spec.epsilon**2

    def test_basis_mismatch(self):
        h1 = Operator(np.eye(2, dtype=complex), "a")
        h2 = Operator(np.eye(2, dtype=complex), "b")
        with pytest.raises(ValueError, match="different bases"):
            fidelity_series(h1, h2, np.array([1.0, 0.0]), TimeGrid.linspace(1.0, 3))


class TestObservables:
    def setup_method(self):
        self.spec = CascadeModelSpec(3, 1, (1.0, 1.0), detunings_in=(0.0, 20.0, 0.0))
        self.sector = sector_of_product_state(self.spec, 4, 1)
        self.h = build_full_h(self.spec, self.sector)
        self.psi0 = product_state(self.sector, 4, 1)

    def test_initial_populations(self):
        obs = observables(self.psi0[np.newaxis, :], self.sector)
        assert obs.populations[0] == pytest.approx([1.0, 0.0, 0.0])
        assert obs.photon[0] == pytest.approx(4.0)

    def test_population_sum_is_atom_count(self):
        grid = TimeGrid.linspace(40.0, 101)
        states = evolve(self.h, self.psi0, grid)
        obs = observables(states, self.sector)
        assert np.allclose(obs.populations.sum(axis=1), 1.0, atol=1e-12)

    def test_excitation_conserved(self):
        grid = TimeGrid.linspace(40.0, 101)
        states = evolve(self.h, self.psi0, grid)
        nhat = excitation_operator(self.sector).matrix.diagonal().real
        expectation = (np.abs(states) ** 2) @ nhat
        assert np.max(np.abs(expectation - expectation[0])) < 1e-10

    def test_two_photon_rabi_amplitude(self):
        from effham.multilevel import effective_two_photon

        h2 = effective_two_photon(self.spec, self.sector)
        lam = abs(h2.matrix[2, 0])
        grid = TimeGrid.linspace(2 * math.pi / lam, 301)
        states = evolve(self.h, self.psi0, grid)
        obs = observables(states, self.sector)
        top = obs.populations[:, 2].max()
        assert 0.8 <= top <= 1.0 + 1e-12


class TestEigenvalueCompare:
    def test_identical_operators(self):
        rng = np.random.default_rng(8)
        raw = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
        h = Operator((raw + raw.conj().T) / 2, "t")
        result = eigenvalue_compare(h, h)
        assert result.max_error == pytest.approx(0.0, abs=1e-12)
        assert not result.ambiguous

    def test_deformed_order1_scaling(self):
        mod = build_module(cubic_structural(6), 0.0, 6)

        def metric(eps):
            spec = Su2HamiltonianSpec(1.0 / 1.0, eps, mod)
            return eigenvalue_compare(
                interaction_hamiltonian(spec), effective_order1(spec)
            ).max_error

        study = scaling_study([0.1, 0.05, 0.025], metric)
        assert study.fitted_exponent >= 2.5

    def test_spin_half_error_formula(self):
        # exact gap minus the diagonal form: −g⁴/Δ³ to leading order
        mod = build_module(spin_structural(0.5), -0.5, 2)
        delta, g = 1.0, 0.05
        spec = Su2HamiltonianSpec(delta, g, mod)
        result = eigenvalue_compare(
            interaction_hamiltonian(spec), effective_order1(spec)
        )
        predicted = g**4 / delta**3
        assert result.max_error == pytest.approx(predicted, rel=0.02)

    def test_subspace_restriction(self):
        spec = CascadeModelSpec(3, 1, (1.0, 1.0), detunings_in=(0.0, 20.0, 0.0))
        sector = sector_of_product_state(spec, 4, 1)
        from effham.multilevel import effective_two_photon

        h = build_full_h(spec, sector)
        h2 = effective_two_photon(spec, sector)
        support = effective_support(h2)
        assert len(support) == 2
        result = eigenvalue_compare(h, h2, support=support)
        assert len(result.pairs) == 2
        assert result.max_error < 0.02
        assert not result.ambiguous


class TestScalingStudy:
    def test_pure_power_law(self):
        study = scaling_study([0.1, 0.05, 0.025], lambda e: 3.0 * e**4)
        assert study.fitted_exponent == pytest.approx(4.0, abs=1e-12)
        assert study.fit_residual_rms < 1e-12

    def test_constant_error_family_flagged(self):
        study = scaling_study([0.1, 0.05, 0.025], lambda e: 0.7)
        assert abs(study.fitted_exponent) < 1e-12

    def test_requires_three_points(self):
        with pytest.raises(ValueError, match="at least 3"):
            scaling_study([0.1, 0.05], lambda e: e)

    def test_rejects_nonpositive_errors(self):
        with pytest.raises(ValueError, match="positive"):
            scaling_study([0.1, 0.05, 0.025], lambda e: 0.0)

    def test_epsilons_stored_descending(self):
        study = scaling_study([0.025, 0.1, 0.05], lambda e: e)
        assert list(study.epsilons) == [0.1, 0.05, 0.025]
