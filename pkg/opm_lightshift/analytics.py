"""Closed-form estimates of the resonance, light shift and linewidth.

These are fast cross-checks for the numerical solvers: the light shift and
line broadening obtained from the diagonal coherence element, the compact
optical-pumping rate and light shift, and a test for the spin-temperature
form of a population table. Everything is in Hz.
"""

from typing import Mapping, Optional, Sequence

import numpy as np

from opm_lightshift.effective_master import compact_rates
from opm_lightshift.full_master import larmor_frequency
from opm_lightshift.models import AnalyticEstimates, AtomSpec, ExperimentParams, SpinTemperatureResult

SPIN_TEMPERATURE_TOLERANCE = 1e-3
POPULATION_FLOOR = 1e-8


def _multiplicity(atom: AtomSpec) -> float:
    return 2 * atom.nuclear_spin_I + 1


def _delta_aa(atom: AtomSpec, params: ExperimentParams) -> float:
    return params.detuning - atom.delta_S


def analytic_light_shift(atom: AtomSpec, params: ExperimentParams) -> float:
    """δω = Ω²Δ / ((2I+1)(Γ² + Δ_S²)), valid near Δ = 0."""
    return params.rabi ** 2 * params.detuning / (
        _multiplicity(atom) * (params.gamma_pb ** 2 + atom.delta_S ** 2)
    )


def analytic_resonance_frequency(atom: AtomSpec, params: ExperimentParams) -> float:
    """ω̃ = ω_L + Ω²Δ_aa / ((2I+1)(Γ² + Δ_aa²))."""
    daa = _delta_aa(atom, params)
    denom = _multiplicity(atom) * (params.gamma_pb ** 2 + daa ** 2)
    shift = params.rabi ** 2 * daa / denom if denom else 0.0
    return larmor_frequency(atom, params) + shift


def analytic_resonance_shift(atom: AtomSpec, params: ExperimentParams) -> float:
    """ω̃ - ω_L."""
    return analytic_resonance_frequency(atom, params) - larmor_frequency(atom, params)


def _pump_broadening(atom: AtomSpec, params: ExperimentParams) -> float:
    daa = _delta_aa(atom, params)
    denom = _multiplicity(atom) * (params.gamma_pb ** 2 + daa ** 2)
    return params.rabi ** 2 * params.gamma_pb / denom if denom else 0.0


def analytic_linewidth(
    atom: AtomSpec, params: ExperimentParams, mean_Sz: float, polarized: bool = False
) -> float:
    """Line broadening γ̃.

    The general form is

        Ω²Γ/((2I+1)(Γ²+Δ_aa²)) + (I+1)γ/(2I+1) - γ_se/(2I+1) - 2Iγ_se<S_z>/(2I+1);

    with polarized=True the fully polarized form
    Ω²Γ/((2I+1)(Γ²+Δ_aa²)) + (I+1)γ_sd/(2I+1) is returned and mean_Sz is ignored.
    """
    i = atom.nuclear_spin_I
    m = _multiplicity(atom)
    pump = _pump_broadening(atom, params)
    if polarized:
        return pump + (i + 1) * params.gamma_sd_collision / m
    return (
        pump
        + (i + 1) * params.gamma_total / m
        - params.gamma_se / m
        - 2 * i * params.gamma_se * mean_Sz / m
    )


def optical_pumping_rate(params: ExperimentParams) -> float:
    """Γ_OP = η²Γ/(Γ² + Δ²)."""
    return compact_rates(params)[0]


def compact_light_shift(params: ExperimentParams) -> float:
    """Δ_LS = -η²Δ/(Γ² + Δ²)."""
    return compact_rates(params)[1]


def analytic_estimates(atom: AtomSpec, params: ExperimentParams, mean_Sz: float = 0.5) -> AnalyticEstimates:
    """All closed-form estimates for one parameter set."""
    return AnalyticEstimates(
        tilde_omega=analytic_resonance_frequency(atom, params),
        tilde_gamma=analytic_linewidth(atom, params, mean_Sz),
        delta_omega_ls=analytic_light_shift(atom, params),
        gamma_op=optical_pumping_rate(params),
        delta_ls_compact=compact_light_shift(params),
    )


def spin_temperature_test(
    populations: Mapping[tuple[float, float], float],
    tolerance: float = SPIN_TEMPERATURE_TOLERANCE,
    floor: float = POPULATION_FLOOR,
) -> SpinTemperatureResult:
    """Compare p(a, M) with p(b, M) for every M shared by both multiplets.

    Pairs where both populations are below `floor` are skipped; the
    relative deviation is |p_a - p_b| / max(p_a, p_b).
    """
    values = sorted({F for F, _ in populations})
    if len(values) < 2:
        return SpinTemperatureResult(is_spin_temperature=True, max_deviation=0.0)
    a, b = values[-1], values[0]
    worst: Optional[float] = None
    max_dev = 0.0
    for (F, M), pb in populations.items():
        if F != b:
            continue
        pa = populations.get((a, M))
        if pa is None or max(pa, pb) < floor:
            continue
        deviation = abs(pa - pb) / max(pa, pb)
        if worst is None or deviation > max_dev:
            max_dev, worst = deviation, M
    return SpinTemperatureResult(
        is_spin_temperature=max_dev < tolerance,
        max_deviation=max_dev,
        worst_m=worst,
    )


def find_zero_crossings(x: Sequence[float], y: Sequence[float]) -> list[float]:
    """Linearly interpolated x where y changes sign, skipping NaN gaps."""
    xs, ys = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    crossings = []
    for k in range(len(xs) - 1):
        y0, y1 = ys[k], ys[k + 1]
        if not (np.isfinite(y0) and np.isfinite(y1)):
            continue
        if y0 == 0:
            crossings.append(float(xs[k]))
        elif y0 * y1 < 0:
            crossings.append(float(xs[k] - y0 * (xs[k + 1] - xs[k]) / (y1 - y0)))
    return crossings


def find_local_extrema(x: Sequence[float], y: Sequence[float]) -> tuple[list[float], list[float]]:
    """Interior local maxima and minima of y as (maxima, minima) positions in x."""
    xs, ys = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    maxima, minima = [], []
    for k in range(1, len(xs) - 1):
        prev, cur, nxt = ys[k - 1], ys[k], ys[k + 1]
        if not np.all(np.isfinite([prev, cur, nxt])):
            continue
        if cur > prev and cur >= nxt:
            maxima.append(float(xs[k]))
        elif cur < prev and cur <= nxt:
            minima.append(float(xs[k]))
    return maxima, minima
