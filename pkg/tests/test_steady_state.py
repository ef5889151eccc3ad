"""Tests for the self-consistent steady-state solvers."""

import numpy as np
import pytest

from opm_lightshift.config import Settings
from opm_lightshift.effective_master import assemble_effective_liouvillian
from opm_lightshift.exceptions import ConvergenceError
from opm_lightshift.models import ExperimentParams
from opm_lightshift.steady_state import (
    manifold_populations,
    nullity,
    populations,
    precision_floor,
    check_multistability,
    solve_compact_steady_state,
    solve_full_steady_state,
    solve_null_space,
    solve_rate_equations,
    solve_steady_state,
)
from opm_lightshift.superoperators import MeanFields


class TestNullSpace:
    """Tests for solve_null_space and nullity."""

    def test_unit_trace_hermitian(self, spin_half_atom, pumped_params, half_basis):
        """The null vector is a Hermitian unit-trace matrix with small residual."""
        generator = assemble_effective_liouvillian(
            spin_half_atom, pumped_params, mean_fields=MeanFields(sz=0.1), basis=half_basis
        )
        rho, residual = solve_null_space(generator)
        assert np.trace(rho).real == pytest.approx(1.0)
        assert np.allclose(rho, rho.conj().T)
        assert residual < 1e-12

    def test_unique_null_space(self, spin_half_atom, pumped_params, half_basis):
        """Relaxation makes the steady state unique."""
        generator = assemble_effective_liouvillian(spin_half_atom, pumped_params, basis=half_basis)
        assert nullity(generator) == 1

    def test_precision_floor(self):
        """Floor grows with σ_max / σ_gap."""
        sigma = np.array([1e9, 1e3, 1e1, 0.0])
        assert precision_floor(sigma) == pytest.approx(100 * np.finfo(float).eps * 1e8)
        assert precision_floor(np.array([1.0])) == 0.0


class TestSolveSteadyState:
    """Tests for solve_steady_state."""

    def test_no_light_no_polarization(self, spin_half_atom, dark_params, test_settings):
        """Ω = 0 gives <S_z> = 0."""
        solution = solve_steady_state(spin_half_atom, dark_params, settings=test_settings)
        assert abs(solution.mean_Sz) < 1e-10
        assert not solution.degenerate

    def test_pumping_polarizes(self, spin_half_atom, pumped_params, test_settings):
        """σ+ pumping gives 0 < <S_z> <= 1/2."""
        solution = solve_steady_state(spin_half_atom, pumped_params, settings=test_settings)
        assert 0.0 < solution.mean_Sz <= 0.5
        assert solution.residual < test_settings.residual_tolerance

    def test_populations_sum_to_one(self, spin_half_atom, pumped_params, test_settings):
        """Ground populations are a probability distribution."""
        solution = solve_steady_state(spin_half_atom, pumped_params, settings=test_settings)
        pops = populations(solution)
        assert len(pops) == 4
        assert sum(pops.values()) == pytest.approx(1.0)
        assert min(pops.values()) > -1e-12
        totals = manifold_populations(solution)
        assert set(totals) == {1.0, 0.0}
        assert sum(totals.values()) == pytest.approx(1.0)

    def test_positive_semidefinite(self, spin_half_atom, pumped_params, test_settings):
        """The steady state is a valid density matrix."""
        solution = solve_steady_state(spin_half_atom, pumped_params, settings=test_settings)
        assert solution.min_eigenvalue > -1e-10

    def test_mixing_independent(self, spin_half_atom, pumped_params, test_settings):
        """Different damping factors reach the same fixed point."""
        slow = solve_steady_state(spin_half_atom, pumped_params, settings=test_settings, mixing=0.3)
        fast = solve_steady_state(spin_half_atom, pumped_params, settings=test_settings, mixing=1.0)
        assert slow.mean_Sz == pytest.approx(fast.mean_Sz, abs=1e-9)

    def test_self_consistent(self, spin_half_atom, pumped_params, test_settings):
        """The returned <S_z> equals Tr[S_z ρ0]."""
        solution = solve_steady_state(spin_half_atom, pumped_params, settings=test_settings)
        generator = solution.generator
        measured = generator.mean_fields_of(generator.reduce(solution.rho0))[0]
        assert measured == pytest.approx(solution.mean_Sz, abs=1e-9)
        assert generator.mean_fields.sz == pytest.approx(solution.mean_Sz, abs=1e-9)

    def test_no_transverse_polarization(self, spin_half_atom, pumped_params, test_settings):
        """<S_+> vanishes without a transverse field."""
        solution = solve_steady_state(spin_half_atom, pumped_params, settings=test_settings)
        assert abs(solution.mean_Sp) < 1e-10

    def test_iteration_limit(self, spin_half_atom, pumped_params):
        """A single iteration is not enough and raises ConvergenceError."""
        settings = Settings(max_iter=1)
        with pytest.raises(ConvergenceError) as exc_info:
            solve_steady_state(spin_half_atom, pumped_params, settings=settings)
        assert len(exc_info.value.history) >= 1

    def test_degenerate_without_relaxation(self, spin_half_atom, test_settings):
        """No pumping and no relaxation leaves the steady state undetermined."""
        params = ExperimentParams(rabi_prime=0.0, gamma_pb=1e9, B_z=0.01)
        solution = solve_steady_state(spin_half_atom, params, settings=test_settings)
        assert solution.degenerate
        assert solution.method == "degenerate"
        assert solution.mean_Sz == pytest.approx(0.0, abs=1e-12)


class TestReducedModels:
    """Tests for the rate-equation and compact-form solvers."""

    def test_rate_equations_match_effective(self, rb87, pumped_params, test_settings):
        """Populations alone reproduce <S_z> when no transverse field acts."""
        full = solve_steady_state(rb87, pumped_params, settings=test_settings)
        reduced = solve_rate_equations(rb87, pumped_params, settings=test_settings)
        assert reduced.mean_Sz == pytest.approx(full.mean_Sz, abs=1e-8)

    def test_compact_form_polarizes(self, rb87, pumped_params, test_settings):
        """The compact optical-pumping equation also polarizes."""
        solution = solve_compact_steady_state(rb87, pumped_params, settings=test_settings)
        assert 0.0 < solution.mean_Sz <= 0.5
        assert np.trace(solution.rho0).real == pytest.approx(1.0)


class TestFullSteadyState:
    """Tests for solve_full_steady_state."""

    def test_dark_full_state(self, spin_half_atom, dark_params, test_settings):
        """Without light the full equation relaxes to an unpolarized ground state."""
        solution = solve_full_steady_state(spin_half_atom, dark_params, settings=test_settings)
        assert abs(solution.mean_Sz) < 1e-5
        assert solution.excited_population == pytest.approx(0.0, abs=1e-8)
        assert len(solution.levels) == 8

    def test_weak_pumping_agrees_with_effective(self, spin_half_atom, pumped_params, test_settings):
        """At Ω ≪ Γ_pb the full and effective equations agree."""
        full = solve_full_steady_state(spin_half_atom, pumped_params, settings=test_settings)
        effective = solve_steady_state(spin_half_atom, pumped_params, settings=test_settings)
        assert full.mean_Sz == pytest.approx(effective.mean_Sz, rel=1e-2)
        assert 0.0 < full.excited_population < 1e-4


class TestMultistability:
    """Tests for check_multistability."""

    def test_unique_fixed_point(self, spin_half_atom, pumped_params, test_settings):
        """A single fixed point is reported once."""
        found = check_multistability(
            lambda alpha: solve_steady_state(
                spin_half_atom, pumped_params, settings=test_settings, mixing=alpha
            )
        )
        assert len(found) == 1
