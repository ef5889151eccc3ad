"""Scenario-level checks of the cesium and rubidium presets."""

import dataclasses

import pytest

from opm_lightshift.analytics import find_zero_crossings, spin_temperature_test
from opm_lightshift.effective_master import assemble_effective_liouvillian
from opm_lightshift.full_master import larmor_frequency
from opm_lightshift.linear_response import extract_resonance
from opm_lightshift.models import AtomSpec
from opm_lightshift.presets import get_preset
from opm_lightshift.steady_state import (
    populations,
    solve_compact_steady_state,
    solve_rate_equations,
    solve_steady_state,
)
from opm_lightshift.superoperators import MeanFields

CS_DELTA_S = 9.193e9
MIDPOINT = 5.0e9


def _sz(preset: str, detuning: float, settings) -> float:
    scenario = get_preset(preset)
    params = scenario.params.with_detuning(detuning)
    return solve_steady_state(scenario.atom, params, settings=settings).mean_Sz


def _resonance(atom, params, settings):
    steady = solve_steady_state(atom, params, settings=settings)
    return extract_resonance(atom, params, steady, settings=settings)


class TestPolarizationVersusDetuning:
    """<S_z> against pump detuning for the two buffer-gas pressures."""

    def test_narrow_line_resolves_both_multiplets(self, test_settings):
        """At 100 torr |<S_z>| dips between the two hyperfine resonances."""
        near_b = abs(_sz("cs-100torr", 0.0, test_settings))
        near_a = abs(_sz("cs-100torr", CS_DELTA_S, test_settings))
        between = abs(_sz("cs-100torr", MIDPOINT, test_settings))
        assert between < near_b
        assert between < near_a

    def test_pressure_ordering(self, test_settings):
        """100 torr pumps harder at Δ = 0, 700 torr harder at Δ = Δ_S."""
        assert abs(_sz("cs-100torr", 0.0, test_settings)) > abs(_sz("cs-700torr", 0.0, test_settings))
        assert abs(_sz("cs-100torr", CS_DELTA_S, test_settings)) < abs(
            _sz("cs-700torr", CS_DELTA_S, test_settings)
        )

    def test_broad_line_fills_the_gap(self, test_settings):
        """The dip between the resonances is relatively shallower at 700 torr."""

        def depth(preset: str) -> float:
            peaks = min(
                abs(_sz(preset, 0.0, test_settings)), abs(_sz(preset, CS_DELTA_S, test_settings))
            )
            return abs(_sz(preset, MIDPOINT, test_settings)) / peaks

        assert depth("cs-700torr") > depth("cs-100torr")


class TestRateEquationsAlongSweep:
    """Rate equations against the effective equation without transverse fields."""

    @pytest.mark.parametrize("detuning", [-1e9, 0.0, 2e9, CS_DELTA_S])
    def test_populations_agree(self, detuning, test_settings):
        """Every ground population agrees to 1e-8 at each detuning."""
        scenario = get_preset("cs-100torr")
        params = scenario.params.with_detuning(detuning)
        effective = populations(solve_steady_state(scenario.atom, params, settings=test_settings))
        rates = populations(solve_rate_equations(scenario.atom, params, settings=test_settings))
        assert effective.keys() == rates.keys()
        for key, value in effective.items():
            assert rates[key] == pytest.approx(value, abs=1e-8)


class TestSpinTemperature:
    """Spin-temperature behaviour of the ground populations."""

    @pytest.fixture
    def unresolved_cesium(self) -> AtomSpec:
        """Cesium with both hyperfine splittings shrunk to Γ/1000 at 100 torr."""
        return AtomSpec(name="cs-unresolved", nuclear_spin_I=3.5, delta_S=0.6e6, delta_P=0.6e6)

    @pytest.fixture
    def weak_pump(self):
        return get_preset("cs-100torr").params.model_copy(update={"rabi_prime": 3e5})

    def test_unresolved_limit_is_spin_temperature(self, unresolved_cesium, weak_pump, test_settings):
        """p(a, M) = p(b, M) once the optical line hides the hyperfine structure."""
        steady = solve_steady_state(unresolved_cesium, weak_pump, settings=test_settings)
        assert abs(steady.mean_Sz) > 0.05
        result = spin_temperature_test(populations(steady), tolerance=1e-3)
        assert result.is_spin_temperature, result

    def test_unresolved_limit_matches_compact_form(self, unresolved_cesium, weak_pump, test_settings):
        """The effective and compact equations give the same populations."""
        effective = populations(solve_steady_state(unresolved_cesium, weak_pump, settings=test_settings))
        compact = populations(
            solve_compact_steady_state(unresolved_cesium, weak_pump, settings=test_settings)
        )
        for key, value in effective.items():
            assert compact[key] == pytest.approx(value, rel=1e-3)

    def test_resolved_cesium_is_not_spin_temperature(self, test_settings):
        """Hyperfine-selective pumping at Δ = 0 breaks the spin-temperature distribution."""
        scenario = get_preset("cs-100torr")
        steady = solve_steady_state(scenario.atom, scenario.params, settings=test_settings)
        result = spin_temperature_test(populations(steady))
        assert not result.is_spin_temperature
        assert result.max_deviation > 1e-2


class TestResonanceFeatures:
    """Light shift and linewidth of the cesium resonance."""

    def test_light_shift_slope_near_resonance(self, test_settings):
        """d(ω0 - ω_L)/dΔ at Δ = 0 is close to Ω²/((2I+1)(Γ² + Δ_S²)) in magnitude."""
        scenario = get_preset("cs-100torr")
        step = 1e8
        shifts = [
            _resonance(scenario.atom, scenario.params.with_detuning(d), test_settings).light_shift
            for d in (-step, step)
        ]
        slope = (shifts[1] - shifts[0]) / (2 * step)
        assert abs(slope) == pytest.approx(2.48e-8, rel=0.3)

    def test_broad_line_shift_crosses_zero_at_upper_multiplet(self, test_settings):
        """At 700 torr the light shift changes sign across Δ_aa = 0."""
        scenario = get_preset("cs-700torr")
        detunings = [CS_DELTA_S - 4e9, CS_DELTA_S + 4e9]
        shifts = [
            _resonance(scenario.atom, scenario.params.with_detuning(d), test_settings).light_shift
            for d in detunings
        ]
        assert len(find_zero_crossings(detunings, shifts)) == 1

    def test_far_detuned_linewidth_ignores_pump(self, test_settings):
        """Doubling Ω or Γ far off resonance leaves the linewidth within 1%."""
        scenario = get_preset("cs-100torr")
        base = scenario.params.with_detuning(50 * CS_DELTA_S)
        reference = _resonance(scenario.atom, base, test_settings).linewidth
        for update in ({"rabi_prime": 2 * base.rabi_prime}, {"gamma_pb": 2 * base.gamma_pb}):
            width = _resonance(scenario.atom, base.model_copy(update=update), test_settings).linewidth
            assert width == pytest.approx(reference, rel=1e-2)

    def test_linewidth_narrower_on_resonance(self, test_settings):
        """At 100 torr the line is narrower at Δ = 0 than between the resonances."""
        scenario = get_preset("cs-100torr")
        on = _resonance(scenario.atom, scenario.params, test_settings).linewidth
        between = _resonance(scenario.atom, scenario.params.with_detuning(MIDPOINT), test_settings).linewidth
        assert on < between

    def test_dark_resonance_at_larmor_frequency(self, rb87, pumped_params, test_settings):
        """With Ω = 0 and no spin exchange ω0 equals ω_L."""
        params = pumped_params.model_copy(update={"gamma_se": 0.0})
        pumped = solve_steady_state(rb87, params, settings=test_settings)
        dark = params.model_copy(update={"rabi_prime": 0.0})
        generator = assemble_effective_liouvillian(
            rb87, dark, mean_fields=MeanFields(sz=pumped.mean_Sz)
        )
        polarized = dataclasses.replace(pumped, generator=generator)
        curve = extract_resonance(rb87, dark, polarized, settings=test_settings)
        assert curve.omega_zero == pytest.approx(larmor_frequency(rb87, dark), abs=1e-3)
        assert curve.light_shift == pytest.approx(0.0, abs=1e-3)
