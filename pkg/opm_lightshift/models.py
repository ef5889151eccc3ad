"""Pydantic data models for opm-lightshift.

This module defines the configuration-facing structures: the atom and the
experimental parameters of one scenario, the sweep and calibration
settings, and the flat result records written to CSV and JSON. Array-valued
results (bases, Liouvillians, steady states, response curves) are plain
dataclasses in the modules that compute them.
"""

import json
import math
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    computed_field,
    field_validator,
    model_validator,
)

from opm_lightshift.exceptions import ConfigError

# Electron gyromagnetic ratio γ_e / 2π in Hz per Gauss.
ELECTRON_GYROMAGNETIC_RATIO = 2.8025e6

SCHEMA_VERSION = 1

CSV_HEADER = (
    "delta_hz",
    "sz",
    "light_shift_hz",
    "linewidth_hz",
    "iterations",
    "residual",
    "status",
)


class AtomSpec(BaseModel):
    """Nuclear spin and hyperfine splittings defining the Hilbert space.

    Attributes:
        name: Short label (e.g. "cs133")
        nuclear_spin_I: Nuclear spin I, a positive half-integer or integer
        delta_S: Ground-state hyperfine splitting (Hz)
        delta_P: Excited P1/2 hyperfine splitting (Hz)
        gyromagnetic_ratio_e: Electron gyromagnetic ratio (Hz/G)
    """
    model_config = ConfigDict(frozen=True)

    name: str = Field(default="custom", description="Atom label")
    nuclear_spin_I: float = Field(..., ge=0.5, description="Nuclear spin I")
    delta_S: float = Field(..., gt=0.0, description="Ground hyperfine splitting (Hz)")
    delta_P: float = Field(..., gt=0.0, description="Excited hyperfine splitting (Hz)")
    gyromagnetic_ratio_e: float = Field(
        default=ELECTRON_GYROMAGNETIC_RATIO, gt=0.0, description="γ_e (Hz/G)"
    )

    @field_validator("nuclear_spin_I")
    @classmethod
    def check_half_integer(cls, v: float) -> float:
        """Reject nuclear spins that are not multiples of 1/2."""
        if not float(2 * v).is_integer():
            raise ValueError(f"nuclear spin must be a half-integer or integer, got {v}")
        return v

    @property
    def spin(self) -> Fraction:
        """Nuclear spin as an exact fraction."""
        return Fraction(int(round(2 * self.nuclear_spin_I)), 2)

    @computed_field
    @property
    def multiplet_a(self) -> float:
        """Upper ground multiplet F = a = I + 1/2."""
        return self.nuclear_spin_I + 0.5

    @computed_field
    @property
    def multiplet_b(self) -> float:
        """Lower ground multiplet F = b = I - 1/2."""
        return self.nuclear_spin_I - 0.5

    @computed_field
    @property
    def ground_dimension(self) -> int:
        """Number of ground levels, 4I + 2."""
        return int(round(4 * self.nuclear_spin_I + 2))

    @computed_field
    @property
    def full_dimension(self) -> int:
        """Number of levels on the D1 line, 8I + 4."""
        return 2 * self.ground_dimension


class ExperimentParams(BaseModel):
    """Pump, collision, broadening and field parameters for one scenario.

    All frequencies and rates are regular frequencies in Hz; fields are in Gauss.

    Attributes:
        rabi_prime: Orbital Rabi frequency Ω'
        detuning: Pump detuning Δ from the b-ground to a-excited transition
        gamma_pb: Pressure broadening Γ_pb of the P1/2 states
        gamma_sd_optical: Spontaneous decay rate Γ_sd
        gamma_se: Spin-exchange rate γ_se
        gamma_sd_collision: Spin-destruction rate γ_sd
        B_z: Static field along the pump axis
        B_x: Amplitude of the transverse RF field
        rf_frequency: RF frequency ω used by the time-domain drive
        pump_sign: +1 for the left-handed pump; -1 flips B_z to describe the right-handed case
        eta_ratio: η/Ω used by the compact-form rates Γ_OP and Δ_LS
    """
    model_config = ConfigDict(frozen=True)

    rabi_prime: float = Field(..., ge=0.0, description="Rabi frequency Ω' (Hz)")
    detuning: float = Field(default=0.0, description="Pump detuning Δ (Hz)")
    gamma_pb: float = Field(..., ge=0.0, description="Pressure broadening Γ_pb (Hz)")
    gamma_sd_optical: float = Field(default=0.0, ge=0.0, description="Spontaneous decay Γ_sd (Hz)")
    gamma_se: float = Field(default=0.0, ge=0.0, description="Spin-exchange rate γ_se (Hz)")
    gamma_sd_collision: float = Field(
        default=0.0, ge=0.0, description="Spin-destruction rate γ_sd (Hz)"
    )
    B_z: float = Field(default=0.1, description="Static field B_z (G)")
    B_x: float = Field(default=3e-5, ge=0.0, description="RF amplitude B_x (G)")
    rf_frequency: float = Field(default=0.0, description="RF frequency ω (Hz)")
    pump_sign: Literal[1, -1] = Field(default=1, description="Pump handedness")
    eta_ratio: float = Field(default=1.0, gt=0.0, description="η/Ω for Γ_OP and Δ_LS")

    @classmethod
    def from_rabi(cls, rabi: float, **kwargs: object) -> "ExperimentParams":
        """Build parameters from the D1 coupling Ω = sqrt(2/3) Ω'."""
        return cls(rabi_prime=rabi / math.sqrt(2.0 / 3.0), **kwargs)  # type: ignore[arg-type]

    @computed_field
    @property
    def gamma_total(self) -> float:
        """Total ground relaxation γ = γ_se + γ_sd."""
        return self.gamma_se + self.gamma_sd_collision

    @computed_field
    @property
    def rabi(self) -> float:
        """D1 coupling Ω = sqrt(2/3) Ω'."""
        return math.sqrt(2.0 / 3.0) * self.rabi_prime

    @computed_field
    @property
    def weak_driving_ratio(self) -> float:
        """Ω / (Γ_sd/2 + Γ_pb); infinite when the excited state is undamped."""
        width = 0.5 * self.gamma_sd_optical + self.gamma_pb
        if width == 0.0:
            return math.inf if self.rabi > 0 else 0.0
        return self.rabi / width

    @computed_field
    @property
    def weak_driving_warning(self) -> bool:
        """True when Ω exceeds a tenth of the excited-state width."""
        return self.weak_driving_ratio > 0.1

    @property
    def signed_field(self) -> float:
        """B_z with the pump handedness applied."""
        return self.pump_sign * self.B_z

    def with_detuning(self, detuning: float) -> "ExperimentParams":
        """Copy with a different pump detuning."""
        return self.model_copy(update={"detuning": detuning})


class SpacingKind(str, Enum):
    """Distribution of detuning points in a sweep."""
    LINEAR = "linear"
    LOG_SYMMETRIC = "log-symmetric"


class OutputKind(str, Enum):
    """Quantities a sweep computes and writes."""
    SZ = "sz"
    POPULATIONS = "populations"
    LIGHT_SHIFT = "light_shift"
    LINEWIDTH = "linewidth"
    RESPONSE_CURVE = "response_curve"


class SweepSpec(BaseModel):
    """Detuning grid of a sweep.

    Attributes:
        delta_min: Lowest detuning (Hz)
        delta_max: Highest detuning (Hz)
        npoints: Number of detunings
        spacing: Linear grid, or logarithmic in |Δ| on each side of zero
        log_floor: Smallest |Δ| used by the log-symmetric grid (Hz)
    """
    model_config = ConfigDict(frozen=True)

    delta_min: float = Field(..., description="Lowest detuning (Hz)")
    delta_max: float = Field(..., description="Highest detuning (Hz)")
    npoints: int = Field(default=60, ge=2, description="Number of detunings")
    spacing: SpacingKind = Field(default=SpacingKind.LINEAR, description="Grid spacing")
    log_floor: float = Field(default=1e6, gt=0.0, description="Smallest |Δ| on log grids (Hz)")

    @model_validator(mode="after")
    def check_range(self) -> "SweepSpec":
        """Require delta_min < delta_max."""
        if not self.delta_min < self.delta_max:
            raise ValueError(
                f"delta_min ({self.delta_min:g}) must be below delta_max ({self.delta_max:g})"
            )
        return self

    def grid(self) -> np.ndarray:
        """Detunings in ascending order."""
        lo, hi, n = self.delta_min, self.delta_max, self.npoints
        if self.spacing == SpacingKind.LINEAR:
            return np.linspace(lo, hi, n)
        if lo < 0.0 < hi:
            n_neg = min(max(1, round(n * -lo / (hi - lo))), n - 1)
            negative = -np.geomspace(-lo, self.log_floor, n_neg)
            positive = np.geomspace(self.log_floor, hi, n - n_neg)
            return np.concatenate([negative, positive])
        if lo >= 0.0:
            return np.geomspace(max(lo, self.log_floor), hi, n)
        return -np.geomspace(-lo, max(-hi, self.log_floor), n)


class CalibrationSpec(BaseModel):
    """Light-shift calibration against a far-detuned reference.

    Attributes:
        mode: "none" reports ω0 - ω_L; "far_detuned_reference" reports ω0(Δ) - ω0(Δ_ref)
        reference_detuning: Δ_ref (Hz); None falls back to Settings.reference_detuning_hz
    """
    model_config = ConfigDict(frozen=True)

    mode: Literal["none", "far_detuned_reference"] = Field(default="none")
    reference_detuning: Optional[float] = Field(default=None, description="Δ_ref (Hz)")


class SolverOverrides(BaseModel):
    """Per-scenario overrides of the solver settings; None keeps the Settings value."""
    model_config = ConfigDict(frozen=True)

    mixing: Optional[float] = Field(default=None, gt=0.0, le=1.0)
    max_iter: Optional[int] = Field(default=None, ge=1)
    sz_tolerance: Optional[float] = Field(default=None, gt=0.0)
    residual_tolerance: Optional[float] = Field(default=None, gt=0.0)
    zero_tolerance_hz: Optional[float] = Field(default=None, gt=0.0)
    extremum_tolerance_hz: Optional[float] = Field(default=None, gt=0.0)
    scan_points: Optional[int] = Field(default=None, ge=11)
    restrict_coherences: Optional[bool] = None


class ValidationSpec(BaseModel):
    """Weak-driving ladder compared against the full master equation.

    Attributes:
        omega_ratios: Values of Ω / (Γ_sd/2 + Γ_pb) to test
        method: "null-space" solves the full steady state directly; "integrate"
            time-evolves the full equation and polishes the final state
        settle_time_constants: Integration length in units of 1/γ for "integrate"
        include_zero_rung: Also compare at Ω = 0
    """
    model_config = ConfigDict(frozen=True)

    omega_ratios: list[float] = Field(default_factory=lambda: [1e-2, 3e-3, 1e-3])
    method: Literal["null-space", "integrate"] = Field(default="null-space")
    settle_time_constants: float = Field(default=20.0, gt=0.0)
    include_zero_rung: bool = Field(default=True)

    @field_validator("omega_ratios")
    @classmethod
    def check_ratios(cls, v: list[float]) -> list[float]:
        """Ratios must be positive and at least one must be given."""
        if not v or any(r <= 0 for r in v):
            raise ValueError("omega_ratios must be a non-empty list of positive numbers")
        return v


class ScenarioConfig(BaseModel):
    """One complete scenario: atom, parameters, sweep grid and outputs.

    Scenario files are JSON documents carrying schema_version = 1.
    """
    model_config = ConfigDict(frozen=True)

    schema_version: Literal[1] = Field(default=SCHEMA_VERSION)
    name: str = Field(default="scenario", description="Scenario label")
    atom: AtomSpec
    params: ExperimentParams
    sweep: SweepSpec
    outputs: list[OutputKind] = Field(
        default_factory=lambda: [OutputKind.SZ, OutputKind.LIGHT_SHIFT, OutputKind.LINEWIDTH]
    )
    calibration: CalibrationSpec = Field(default_factory=CalibrationSpec)
    solver: SolverOverrides = Field(default_factory=SolverOverrides)
    validation: ValidationSpec = Field(default_factory=ValidationSpec)

    @computed_field
    @property
    def needs_response(self) -> bool:
        """Whether the sweep must extract resonances."""
        wanted = {OutputKind.LIGHT_SHIFT, OutputKind.LINEWIDTH, OutputKind.RESPONSE_CURVE}
        return bool(wanted.intersection(self.outputs))

    @classmethod
    def from_json_file(cls, path: Path) -> "ScenarioConfig":
        """Load and validate a scenario file.

        Raises:
            ConfigError: If the file is missing, is not JSON, or fails validation.
        """
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"Cannot read scenario file {path}: {e}") from e
        try:
            return cls.model_validate(json.loads(text))
        except json.JSONDecodeError as e:
            raise ConfigError(f"Scenario file {path} is not valid JSON: {e}") from e
        except ValidationError as e:
            raise ConfigError(f"Scenario file {path} is invalid:\n{e}") from e

    def to_json(self) -> str:
        """Serialize to the scenario-file format."""
        return self.model_dump_json(indent=2, exclude={"needs_response"})


class SweepRow(BaseModel):
    """One detuning point of a sweep.

    Attributes:
        delta: Pump detuning (Hz)
        mean_Sz: Steady-state electron polarization <S_z>
        light_shift: ω0 - ω_L, or ω0 - ω0(Δ_ref) when calibrated (Hz)
        linewidth: Half the separation of the Re<S_x+> extrema (Hz)
        iterations: Fixed-point iterations used
        residual: Relative steady-state residual
        status: "ok" or a short failure tag
    """
    delta: float
    mean_Sz: float = math.nan
    light_shift: float = math.nan
    linewidth: float = math.nan
    iterations: int = 0
    residual: float = math.nan
    status: str = "ok"

    @computed_field
    @property
    def ok(self) -> bool:
        """Whether the point solved without error."""
        return self.status == "ok"


class AnalyticEstimates(BaseModel):
    """Closed-form estimates for one scenario (all in Hz).

    Attributes:
        tilde_omega: Resonance frequency ω̃ from the diagonal-element estimate
        tilde_gamma: Line broadening γ̃ (general form)
        delta_omega_ls: Light shift δω for the light-narrowing regime
        gamma_op: Compact-form optical pumping rate Γ_OP
        delta_ls_compact: Compact-form light shift Δ_LS
    """
    tilde_omega: float
    tilde_gamma: float
    delta_omega_ls: float
    gamma_op: float
    delta_ls_compact: float


class SpinTemperatureResult(BaseModel):
    """Outcome of comparing p(a, M) with p(b, M).

    Attributes:
        is_spin_temperature: True when every compared pair agrees within tolerance
        max_deviation: Largest relative deviation found
        worst_m: Magnetic number with the largest deviation (None when nothing compared)
    """
    is_spin_temperature: bool
    max_deviation: float = Field(..., ge=0.0)
    worst_m: Optional[float] = None


class ValidationRung(BaseModel):
    """Effective vs full master-equation comparison at one pump strength."""
    omega_ratio: float
    rabi: float = Field(..., description="Ω (Hz)")
    sz_full: float = math.nan
    sz_effective: float = math.nan
    error: float = math.nan
    population_error: float = math.nan
    excited_population: float = math.nan
    floor: float = Field(default=0.0, description="Round-off level of the two <S_z> solves")
    status: str = "ok"

    @property
    def ok_for_slope(self) -> bool:
        """Solved rungs with Ω > 0 and an error above the round-off floor enter the fit."""
        return self.status == "ok" and self.rabi > 0 and not self.error <= self.floor


class ValidationReport(BaseModel):
    """Convergence report written to report.json by the validate command."""
    scenario: str
    nuclear_spin_I: float
    rungs: list[ValidationRung]
    slope: Optional[float] = None
    excited_slope: Optional[float] = None

    @computed_field
    @property
    def slope_ok(self) -> bool:
        """Whether the log-log error slope lies in 2 ± 0.3."""
        return self.slope is not None and abs(self.slope - 2.0) <= 0.3


class SweepSummary(BaseModel):
    """Structural features of a finished sweep, written to report.json."""
    scenario: str
    points: int
    failures: int
    sz_peaks: list[float] = Field(default_factory=list, description="Detunings of |<S_z>| maxima")
    light_shift_zero_crossings: list[float] = Field(default_factory=list)
    linewidth_minima: list[float] = Field(default_factory=list)
    calibration_offset: Optional[float] = None
    max_residual: float = 0.0
