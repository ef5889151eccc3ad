"""Tests for the RF linear response and resonance extraction."""

import numpy as np
import pytest

from opm_lightshift.exceptions import ResonanceWindowError
from opm_lightshift.full_master import larmor_frequency
from opm_lightshift.linear_response import (
    ScanWindow,
    build_response_system,
    corotating_positions,
    default_window,
    extract_resonance,
    response_at,
    rf_amplitude,
)
from opm_lightshift.steady_state import solve_steady_state


@pytest.fixture
def steady(spin_half_atom, pumped_params, test_settings):
    return solve_steady_state(spin_half_atom, pumped_params, settings=test_settings)


@pytest.fixture
def curve(spin_half_atom, pumped_params, steady, test_settings):
    return extract_resonance(spin_half_atom, pumped_params, steady, settings=test_settings)


class TestScanWindow:
    """Tests for ScanWindow and default_window."""

    def test_grid(self):
        """The grid spans center ± halfwidth."""
        grid = ScanWindow(center=100.0, halfwidth=10.0, npoints=21).grid()
        assert grid[0] == 90.0
        assert grid[-1] == 110.0
        assert len(grid) == 21

    def test_default_window_centered_on_larmor(self, spin_half_atom, pumped_params, steady):
        """The first scan is centred on ω_L."""
        window = default_window(spin_half_atom, pumped_params, steady)
        assert window.center == pytest.approx(larmor_frequency(spin_half_atom, pumped_params))
        assert window.halfwidth >= 10.0 * pumped_params.gamma_total


class TestRFAmplitude:
    """Tests for rf_amplitude."""

    def test_small_field_kept(self, spin_half_atom, pumped_params, test_settings):
        """B_x inside the linear regime is used as given."""
        assert rf_amplitude(spin_half_atom, pumped_params, test_settings) == pumped_params.B_x

    def test_large_field_scaled(self, spin_half_atom, pumped_params, test_settings, caplog):
        """B_x is reduced so that γ_e B_x = 0.01 γ."""
        strong = pumped_params.model_copy(update={"B_x": 1e-3})
        with caplog.at_level("WARNING"):
            scaled = rf_amplitude(spin_half_atom, strong, test_settings)
        expected = 0.01 * strong.gamma_total / spin_half_atom.gyromagnetic_ratio_e
        assert scaled == pytest.approx(expected)
        assert "exceeds" in caplog.text


class TestResponseSystem:
    """Tests for build_response_system and response_at."""

    def test_corotating_positions_spin_half(self, steady):
        """I = 1/2 has two co-rotating coherences, both in F = 1."""
        assert len(corotating_positions(steady)) == 2

    def test_corotating_positions_rb87(self, rb87, pumped_params, test_settings):
        """I = 3/2 has four coherences in F = 2 and two in F = 1."""
        solution = solve_steady_state(rb87, pumped_params, settings=test_settings)
        assert len(corotating_positions(solution)) == 6
        assert len(corotating_positions(solution, branch_sign=-1)) == 6

    def test_no_drive_no_response(self, spin_half_atom, pumped_params, steady, test_settings):
        """B_x = 0 gives <S_x+> = 0 at every frequency."""
        params = pumped_params.model_copy(update={"B_x": 0.0})
        system = build_response_system(spin_half_atom, params, steady, settings=test_settings)
        omega_l = larmor_frequency(spin_half_atom, params)
        assert np.allclose(system.scan(np.array([0.5 * omega_l, omega_l, 2 * omega_l])), 0.0)

    def test_linear_in_drive(self, spin_half_atom, pumped_params, steady, test_settings):
        """Doubling B_x doubles the response."""
        omega_l = larmor_frequency(spin_half_atom, pumped_params)
        single = build_response_system(spin_half_atom, pumped_params, steady, settings=test_settings)
        doubled = build_response_system(
            spin_half_atom,
            pumped_params.model_copy(update={"B_x": 2 * pumped_params.B_x}),
            steady,
            settings=test_settings,
        )
        assert doubled.solve(omega_l) == pytest.approx(2 * single.solve(omega_l))

    def test_response_at_matches_system(self, spin_half_atom, pumped_params, steady, test_settings):
        """response_at solves the same system."""
        omega_l = larmor_frequency(spin_half_atom, pumped_params)
        system = build_response_system(spin_half_atom, pumped_params, steady, settings=test_settings)
        value = response_at(spin_half_atom, pumped_params, steady, omega_l, system=system)
        assert value == system.solve(omega_l)


class TestExtractResonance:
    """Tests for extract_resonance."""

    def test_resonance_near_larmor(self, spin_half_atom, pumped_params, curve):
        """ω0 lies close to ω_L, between the two extrema."""
        omega_l = larmor_frequency(spin_half_atom, pumped_params)
        assert curve.larmor == pytest.approx(omega_l)
        assert abs(curve.light_shift) < 0.2 * omega_l
        lo, hi = sorted((curve.omega_max, curve.omega_min))
        assert lo < curve.omega_zero < hi

    def test_linewidth_positive(self, curve):
        """The line width is half the extremum separation."""
        assert curve.linewidth > 0
        assert curve.linewidth == pytest.approx(abs(curve.omega_max - curve.omega_min) / 2)

    def test_zero_crossing(self, spin_half_atom, pumped_params, steady, curve, test_settings):
        """Re<S_x+> vanishes at ω0."""
        system = build_response_system(spin_half_atom, pumped_params, steady, settings=test_settings)
        peak = np.abs(curve.sx_plus.real).max()
        assert abs(system.solve(curve.omega_zero).real) < 1e-3 * peak

    def test_signal_is_real(self, curve):
        """<S_x(t)> is a real oscillation."""
        t = np.linspace(0.0, 1e-3, 50)
        signal = curve.signal(t, len(curve.omegas) // 2)
        assert signal.shape == (50,)
        assert np.isrealobj(signal)

    def test_full_space_agrees_with_corotating(self, spin_half_atom, pumped_params, steady, curve, test_settings):
        """Counter-rotating terms change the response only slightly."""
        restricted = build_response_system(
            spin_half_atom, pumped_params, steady, restrict=True, settings=test_settings
        )
        full = build_response_system(
            spin_half_atom, pumped_params, steady, restrict=False, settings=test_settings
        )
        a, b = restricted.solve(curve.omega_max), full.solve(curve.omega_max)
        assert abs(a - b) < 0.1 * abs(a)

    def test_no_drive_raises(self, spin_half_atom, pumped_params, steady, test_settings):
        """Without a response the window search gives up."""
        params = pumped_params.model_copy(update={"B_x": 0.0})
        with pytest.raises(ResonanceWindowError):
            extract_resonance(spin_half_atom, params, steady, settings=test_settings)
