"""Linear response of the steady state to a transverse RF field.

With the RF field B_x cos(ωt) the positive-frequency part of the density
matrix solves

    (L0 + L0' - iω) ρ+ = -b,    b = -(i/2) γ_e B_x [S_x, ρ0],

where L0 is the effective generator at the steady-state mean field and L0'
the spin-exchange feedback linearized around ρ0. The feedback is low rank
and is carried by augmenting the system with the mean values Tr[S_± ρ+] as
extra unknowns. The observable is <S_x+> = 2 Tr[S_x ρ+]; its real part is
dispersive around the resonance frequency ω0.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg
from scipy.optimize import brentq, minimize_scalar

from opm_lightshift.analytics import analytic_linewidth, compact_light_shift
from opm_lightshift.config import Settings, get_settings
from opm_lightshift.exceptions import ResonanceWindowError, SingularSystemError
from opm_lightshift.full_master import larmor_frequency
from opm_lightshift.models import AtomSpec, ExperimentParams
from opm_lightshift.spin_basis import HyperfineBasis, build_basis, electron_spin_ops
from opm_lightshift.steady_state import SteadyStateSolution
from opm_lightshift.superoperators import TWO_PI, expectation_row

logger = logging.getLogger(__name__)

MIN_EXTREMUM_SEPARATION = 8
MAX_WINDOW_ADJUSTMENTS = 12


@dataclass(frozen=True)
class ScanWindow:
    """RF-frequency scan around the expected resonance (Hz)."""
    center: float
    halfwidth: float
    npoints: int = 201

    def grid(self) -> np.ndarray:
        return np.linspace(self.center - self.halfwidth, self.center + self.halfwidth, self.npoints)


@dataclass(frozen=True, eq=False)
class ResponseSystem:
    """Augmented linear system for one steady state, reused across frequencies.

    Attributes:
        base: L0 on the response subspace (Hz)
        feedback_columns: L0' pieces applied to ρ0, one column per mean value
        functional_rows: Tr[S_k ·] rows matching feedback_columns
        source: b on the response subspace
        observable: Row giving 2 Tr[S_x ρ+]
        positions: Positions of the subspace within the generator support
        names: Mean values carried as extra unknowns
    """
    base: np.ndarray
    feedback_columns: np.ndarray
    functional_rows: np.ndarray
    source: np.ndarray
    observable: np.ndarray
    positions: np.ndarray
    names: tuple[str, ...]

    @property
    def size(self) -> int:
        return self.base.shape[0]

    def solve_state(self, frequency_hz: float) -> np.ndarray:
        """ρ+ on the response subspace at one RF frequency.

        Raises:
            SingularSystemError: If the system cannot be solved.
        """
        k, r = self.size, len(self.names)
        a = np.zeros((k + r, k + r), dtype=complex)
        a[:k, :k] = self.base - 1j * frequency_hz * np.eye(k)
        a[:k, k:] = self.feedback_columns
        a[k:, :k] = -self.functional_rows
        a[k:, k:] = np.eye(r)
        rhs = np.concatenate([-self.source, np.zeros(r, dtype=complex)])
        try:
            x = scipy.linalg.solve(a, rhs)
        except (np.linalg.LinAlgError, ValueError) as e:
            raise SingularSystemError(frequency_hz) from e
        if not np.all(np.isfinite(x)):
            raise SingularSystemError(frequency_hz)
        return x[:k]

    def solve(self, frequency_hz: float) -> complex:
        """<S_x+> at one RF frequency."""
        return complex(self.observable @ self.solve_state(frequency_hz))

    def scan(self, frequencies: np.ndarray) -> np.ndarray:
        return np.array([self.solve(float(f)) for f in frequencies])


@dataclass(frozen=True, eq=False)
class ResponseCurve:
    """Scanned response and the resonance extracted from it.

    Attributes:
        omegas: RF frequencies of the final scan (Hz)
        sx_plus: <S_x+> at each frequency
        omega_zero: Zero crossing ω0 of Re<S_x+> (Hz)
        linewidth: Half the separation of the Re<S_x+> extrema (Hz)
        omega_max: Location of the Re<S_x+> maximum (Hz)
        omega_min: Location of the Re<S_x+> minimum (Hz)
        larmor: Bare Larmor frequency ω_L (Hz)
    """
    omegas: np.ndarray
    sx_plus: np.ndarray
    omega_zero: float
    linewidth: float
    omega_max: float
    omega_min: float
    larmor: float

    @property
    def light_shift(self) -> float:
        """ω0 - ω_L (Hz)."""
        return self.omega_zero - self.larmor

    def signal(self, t: np.ndarray, omega_index: int) -> np.ndarray:
        """<S_x(t)> = Re<S_x+> cos ωt - Im<S_x+> sin ωt at one scanned frequency."""
        phase = TWO_PI * self.omegas[omega_index] * np.asarray(t)
        value = self.sx_plus[omega_index]
        return value.real * np.cos(phase) - value.imag * np.sin(phase)


def rf_amplitude(atom: AtomSpec, params: ExperimentParams, settings: Optional[Settings] = None) -> float:
    """B_x used for the response, scaled down to stay in the linear regime."""
    settings = settings or get_settings()
    limit = settings.rf_linear_ratio * params.gamma_total
    drive = atom.gyromagnetic_ratio_e * params.B_x
    if limit > 0 and drive > limit:
        scaled = limit / atom.gyromagnetic_ratio_e
        logger.warning(
            f"γ_e B_x = {drive:.3g} Hz exceeds {settings.rf_linear_ratio:g} γ; using B_x = {scaled:.3g} G"
        )
        return scaled
    return params.B_x


def corotating_positions(steady: SteadyStateSolution, branch_sign: int = 1) -> np.ndarray:
    """Support positions of the coherences |aM><a,M+1| and |bM><b,M-1|.

    A negative branch_sign (negative Larmor frequency) swaps the two branches.
    """
    generator = steady.generator
    levels = steady.levels
    a = max(lv.F for lv in levels)
    rows, cols = np.divmod(generator.support, generator.dim)
    keep = []
    for pos, (i, j) in enumerate(zip(rows, cols)):
        li, lj = levels[i], levels[j]
        if li.F != lj.F:
            continue
        wanted = -branch_sign if li.F == a else branch_sign
        if li.M - lj.M == wanted:
            keep.append(pos)
    return np.array(keep, dtype=int)


def build_response_system(
    atom: AtomSpec,
    params: ExperimentParams,
    steady: SteadyStateSolution,
    *,
    restrict: Optional[bool] = None,
    basis: Optional[HyperfineBasis] = None,
    settings: Optional[Settings] = None,
) -> ResponseSystem:
    """Assemble the response system once for a converged steady state.

    Args:
        atom: Atom species
        params: Scenario parameters (B_x, B_z)
        steady: Converged effective steady state
        restrict: Solve only on the co-rotating Δm = ±1 coherences;
            None uses settings.restrict_coherences
        basis: Prebuilt basis
        settings: Linear-regime limit for B_x
    """
    settings = settings or get_settings()
    restrict = settings.restrict_coherences if restrict is None else restrict
    basis = basis or build_basis(atom)
    generator = steady.generator
    sx = electron_spin_ops(basis)["x"]
    x0 = generator.reduce(steady.rho0)

    if restrict:
        branch = 1 if larmor_frequency(atom, params) >= 0 else -1
        positions = corotating_positions(steady, branch)
    else:
        positions = np.arange(generator.size)
    n = len(positions)

    drive = atom.gyromagnetic_ratio_e * rf_amplitude(atom, params, settings)
    source = -0.5j * drive * generator.reduce(sx @ steady.rho0 - steady.rho0 @ sx)

    names = tuple(
        k for k in ("sz", "sp", "sm")
        if k in generator.feedback and np.any(generator.functionals[k][positions] != 0)
    )
    if names:
        columns = np.stack([(generator.feedback[k] @ x0)[positions] for k in names], axis=1)
        rows = np.stack([generator.functionals[k][positions] for k in names])
    else:
        columns = np.zeros((n, 0), dtype=complex)
        rows = np.zeros((0, n), dtype=complex)

    return ResponseSystem(
        base=generator.matrix[np.ix_(positions, positions)],
        feedback_columns=columns,
        functional_rows=rows,
        source=source[positions],
        observable=2.0 * expectation_row(sx)[generator.support][positions],
        positions=positions,
        names=names,
    )


def response_at(
    atom: AtomSpec,
    params: ExperimentParams,
    steady: SteadyStateSolution,
    omega: float,
    *,
    system: Optional[ResponseSystem] = None,
    restrict: Optional[bool] = None,
) -> complex:
    """<S_x+> at RF frequency omega (Hz).

    Raises:
        SingularSystemError: If the response system is singular at omega.
    """
    system = system or build_response_system(atom, params, steady, restrict=restrict)
    return system.solve(omega)


def default_window(
    atom: AtomSpec,
    params: ExperimentParams,
    steady: SteadyStateSolution,
    npoints: int = 201,
) -> ScanWindow:
    """Window centred on ω_L, half-width max(10 γ̃, 50 |Δ_LS|)."""
    width = abs(analytic_linewidth(atom, params, steady.mean_Sz))
    shift = abs(compact_light_shift(params))
    halfwidth = max(10.0 * width, 50.0 * shift, 10.0 * params.gamma_total, 1.0)
    return ScanWindow(center=larmor_frequency(atom, params), halfwidth=halfwidth, npoints=npoints)


def _resolve_window(system: ResponseSystem, window: ScanWindow) -> tuple[np.ndarray, np.ndarray]:
    center, half, n = window.center, window.halfwidth, window.npoints
    frequencies = values = np.array([])
    for _ in range(MAX_WINDOW_ADJUSTMENTS):
        frequencies = np.linspace(center - half, center + half, n)
        values = system.scan(frequencies)
        re = values.real
        i_max, i_min = int(np.argmax(re)), int(np.argmin(re))
        peak = int(np.argmax(np.abs(values)))
        step = frequencies[1] - frequencies[0]
        if {i_max, i_min} & {0, n - 1}:
            center, half = frequencies[peak], 2.0 * half
            logger.debug(f"Extremum at scan edge; widening to ±{half:.4g} Hz around {center:.6g} Hz")
            continue
        if abs(i_max - i_min) < MIN_EXTREMUM_SEPARATION:
            center = 0.5 * (frequencies[i_max] + frequencies[i_min])
            half = 4.0 * max(abs(frequencies[i_max] - frequencies[i_min]), step)
            logger.debug(f"Resonance under-resolved; zooming to ±{half:.4g} Hz around {center:.6g} Hz")
            continue
        return frequencies, values
    raise ResonanceWindowError(
        f"Could not bracket the resonance after {MAX_WINDOW_ADJUSTMENTS} window adjustments",
        frequencies,
        values,
    )


def extract_resonance(
    atom: AtomSpec,
    params: ExperimentParams,
    steady: SteadyStateSolution,
    scan: Optional[ScanWindow] = None,
    *,
    system: Optional[ResponseSystem] = None,
    settings: Optional[Settings] = None,
    restrict: Optional[bool] = None,
) -> ResponseCurve:
    """Scan <S_x+>(ω) and locate its zero crossing and extrema.

    The window is zoomed until the maximum and minimum of Re<S_x+> are
    interior and resolved, then the zero crossing between them is refined
    by bracketing and each extremum by bounded scalar minimization.

    Raises:
        ResonanceWindowError: If Re<S_x+> has no sign change between its extrema.
        SingularSystemError: If the response system is singular.
    """
    settings = settings or get_settings()
    system = system or build_response_system(
        atom, params, steady, restrict=restrict, settings=settings
    )
    scan = scan or default_window(atom, params, steady, settings.scan_points)
    frequencies, values = _resolve_window(system, scan)
    re = values.real
    i_max, i_min = int(np.argmax(re)), int(np.argmin(re))

    lo, hi = sorted((i_min, i_max))
    crossing = next(
        (k for k in range(lo, hi) if np.sign(re[k]) != np.sign(re[k + 1]) or re[k] == 0),
        None,
    )
    if crossing is None:
        raise ResonanceWindowError(
            "Re<S_x+> does not change sign between its extrema", frequencies, values
        )

    def real_part(f: float) -> float:
        return system.solve(f).real

    if re[crossing] == 0:
        omega_zero = float(frequencies[crossing])
    else:
        omega_zero = float(
            brentq(real_part, frequencies[crossing], frequencies[crossing + 1], xtol=settings.zero_tolerance_hz)
        )

    def refine(index: int, sign: float) -> float:
        left = frequencies[max(index - 1, 0)]
        right = frequencies[min(index + 1, len(frequencies) - 1)]
        result = minimize_scalar(
            lambda f: -sign * real_part(f),
            bounds=(left, right),
            method="bounded",
            options={"xatol": settings.extremum_tolerance_hz},
        )
        return float(result.x)

    omega_max = refine(i_max, 1.0)
    omega_min = refine(i_min, -1.0)
    linewidth = abs(omega_max - omega_min) / 2.0
    larmor = larmor_frequency(atom, params)
    logger.debug(
        f"Resonance at {omega_zero:.6f} Hz (shift {omega_zero - larmor:+.6f} Hz), width {linewidth:.4f} Hz"
    )
    return ResponseCurve(
        omegas=frequencies,
        sx_plus=values,
        omega_zero=omega_zero,
        linewidth=linewidth,
        omega_max=omega_max,
        omega_min=omega_min,
        larmor=larmor,
    )
