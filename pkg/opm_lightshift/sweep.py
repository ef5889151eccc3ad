"""Detuning sweeps, validation ladders and their file outputs.

The SweepRunner ties together:
- the effective steady-state solver for every detuning
- resonance extraction from the linear response
- optional calibration against a far-detuned reference
- CSV, gnuplot and JSON report emission
"""

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional

import numpy as np

from opm_lightshift.analytics import find_local_extrema, find_zero_crossings
from opm_lightshift.config import Settings, get_settings
from opm_lightshift.exceptions import (
    ConvergenceError,
    IntegrationError,
    OPMError,
    OutputError,
    ResonanceWindowError,
    SingularDetuningError,
    SingularSystemError,
)
from opm_lightshift.full_master import larmor_frequency
from opm_lightshift.linear_response import ResponseCurve, extract_resonance
from opm_lightshift.models import (
    CSV_HEADER,
    ExperimentParams,
    OutputKind,
    ScenarioConfig,
    SolverOverrides,
    SweepRow,
    SweepSummary,
    ValidationReport,
    ValidationRung,
)
from opm_lightshift.spin_basis import build_basis
from opm_lightshift.steady_state import (
    populations,
    solve_full_steady_state,
    solve_steady_state,
)

logger = logging.getLogger(__name__)

RESPONSE_HEADER = ("omega_hz", "re_sx", "im_sx")


def resolve_settings(settings: Settings, overrides: SolverOverrides) -> Settings:
    """Settings with the scenario's solver overrides applied."""
    update = {k: v for k, v in overrides.model_dump().items() if v is not None}
    return settings.model_copy(update=update) if update else settings


def failure_status(error: OPMError) -> str:
    """Short status tag for a failed sweep point."""
    if isinstance(error, ConvergenceError):
        return "nonconvergence"
    if isinstance(error, ResonanceWindowError):
        return "window"
    if isinstance(error, (SingularSystemError, SingularDetuningError)):
        return "singular"
    if isinstance(error, IntegrationError):
        return "integration"
    return "error"


@dataclass
class PointResult:
    """Everything computed at one detuning."""
    row: SweepRow
    populations: Optional[dict[tuple[float, float], float]] = None
    curve: Optional[ResponseCurve] = None


def solve_point(config: ScenarioConfig, delta: float, settings: Settings) -> PointResult:
    """Steady state and resonance at one detuning; failures become a status."""
    params = config.params.with_detuning(float(delta))
    basis = build_basis(config.atom)
    row = SweepRow(delta=float(delta))
    try:
        steady = solve_steady_state(config.atom, params, basis=basis, settings=settings)
        row = row.model_copy(
            update={
                "mean_Sz": steady.mean_Sz,
                "iterations": steady.iterations,
                "residual": steady.residual,
            }
        )
        curve = None
        if config.needs_response:
            curve = extract_resonance(config.atom, params, steady, settings=settings)
            row = row.model_copy(
                update={"light_shift": curve.light_shift, "linewidth": curve.linewidth}
            )
        pops = populations(steady) if OutputKind.POPULATIONS in config.outputs else None
        return PointResult(row=row, populations=pops, curve=curve)
    except OPMError as e:
        logger.error(f"Δ = {delta:.6g} Hz failed: {e}")
        return PointResult(row=row.model_copy(update={"status": failure_status(e)}))


@dataclass
class SweepResult:
    """Rows of a finished sweep plus optional per-point extras."""
    config: ScenarioConfig
    rows: list[SweepRow]
    populations: dict[float, dict[tuple[float, float], float]] = field(default_factory=dict)
    curves: dict[float, ResponseCurve] = field(default_factory=dict)
    calibration_offset: Optional[float] = None

    @property
    def failures(self) -> int:
        return sum(1 for row in self.rows if not row.ok)


class SweepRunner:
    """Run a detuning sweep for one scenario.

    Usage:
        runner = SweepRunner(get_preset("cs-100torr"))
        result = runner.run()
        for row in result.rows:
            print(row.delta, row.mean_Sz)
    """

    def __init__(
        self,
        config: ScenarioConfig,
        settings: Optional[Settings] = None,
        threads: Optional[int] = None,
        reference_detuning: Optional[float] = None,
    ) -> None:
        """Initialize the runner.

        Args:
            config: Scenario to sweep
            settings: Base settings; the scenario's solver overrides are applied on top
            threads: Worker processes (default: settings.threads)
            reference_detuning: Calibrate light shifts against this Δ_ref (Hz);
                None uses the scenario's calibration section, whose own default
                is settings.reference_detuning_hz
        """
        self.config = config
        self.settings = resolve_settings(settings or get_settings(), config.solver)
        self.threads = threads or self.settings.threads
        if reference_detuning is None and config.calibration.mode == "far_detuned_reference":
            reference_detuning = config.calibration.reference_detuning
            if reference_detuning is None:
                reference_detuning = self.settings.reference_detuning_hz
        self.reference_detuning = reference_detuning

    def calibration_offset(self) -> Optional[float]:
        """ω0(Δ_ref) - ω_L, or None when calibration is off.

        Raises:
            OPMError: If the reference point cannot be solved.
        """
        if self.reference_detuning is None or not self.config.needs_response:
            return None
        params = self.config.params.with_detuning(self.reference_detuning)
        steady = solve_steady_state(self.config.atom, params, settings=self.settings)
        curve = extract_resonance(self.config.atom, params, steady, settings=self.settings)
        logger.info(
            f"Calibration at Δ_ref = {self.reference_detuning:.3g} Hz: offset {curve.light_shift:+.6f} Hz"
        )
        return curve.light_shift

    def run(self, on_point: Optional[Callable[[SweepRow], None]] = None) -> SweepResult:
        """Solve every detuning of the grid.

        Args:
            on_point: Called with each finished row (completion order)

        Returns:
            SweepResult with rows ordered by detuning. If the calibration
            reference cannot be solved, light shifts are NaN and
            calibration_offset is NaN.
        """
        grid = self.config.sweep.grid()
        try:
            offset = self.calibration_offset()
        except OPMError as e:
            logger.error(f"Calibration at Δ_ref = {self.reference_detuning:.3g} Hz failed: {e}")
            offset = math.nan
        logger.info(f"Sweeping {self.config.name}: {len(grid)} detunings on {self.threads} worker(s)")

        results: list[PointResult] = []
        if self.threads > 1:
            with ProcessPoolExecutor(max_workers=self.threads) as pool:
                futures = [
                    pool.submit(solve_point, self.config, float(d), self.settings) for d in grid
                ]
                for future in futures:
                    result = future.result()
                    results.append(result)
                    if on_point:
                        on_point(result.row)
        else:
            for d in grid:
                result = solve_point(self.config, float(d), self.settings)
                results.append(result)
                if on_point:
                    on_point(result.row)

        results.sort(key=lambda r: r.row.delta)
        rows = []
        for r in results:
            row = r.row
            if offset is not None and row.ok:
                row = row.model_copy(update={"light_shift": row.light_shift - offset})
            rows.append(row)

        sweep = SweepResult(
            config=self.config,
            rows=rows,
            populations={r.row.delta: r.populations for r in results if r.populations},
            curves={r.row.delta: r.curve for r in results if r.curve is not None},
            calibration_offset=offset,
        )
        logger.info(f"Sweep {self.config.name} finished with {sweep.failures} failed point(s)")
        return sweep


def _format(value: float) -> str:
    return format(value, ".17g")


def write_sweep_csv(rows: Iterable[SweepRow], path: Path) -> Path:
    """Write sweep rows with 17 significant digits and '\\n' line endings.

    Raises:
        OutputError: If the file cannot be written.
    """
    try:
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for row in rows:
                writer.writerow([
                    _format(row.delta),
                    _format(row.mean_Sz),
                    _format(row.light_shift),
                    _format(row.linewidth),
                    str(row.iterations),
                    _format(row.residual),
                    row.status,
                ])
    except OSError as e:
        raise OutputError(Path(path), str(e)) from e
    return Path(path)


def read_sweep_csv(path: Path) -> list[SweepRow]:
    """Parse a file written by write_sweep_csv."""
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        return [
            SweepRow(
                delta=float(rec["delta_hz"]),
                mean_Sz=float(rec["sz"]),
                light_shift=float(rec["light_shift_hz"]),
                linewidth=float(rec["linewidth_hz"]),
                iterations=int(rec["iterations"]),
                residual=float(rec["residual"]),
                status=rec["status"],
            )
            for rec in reader
        ]


def response_filename(delta: float) -> str:
    return f"response_{_format(delta)}.csv"


def write_response_csv(curve: ResponseCurve, path: Path) -> Path:
    """Write one scanned response curve.

    Raises:
        OutputError: If the file cannot be written.
    """
    try:
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(RESPONSE_HEADER)
            for omega, value in zip(curve.omegas, curve.sx_plus):
                writer.writerow([_format(omega), _format(value.real), _format(value.imag)])
    except OSError as e:
        raise OutputError(Path(path), str(e)) from e
    return Path(path)


def write_populations_csv(
    populations_by_delta: dict[float, dict[tuple[float, float], float]], path: Path
) -> Path:
    """Write populations as rows (delta_hz, F, M, population).

    Raises:
        OutputError: If the file cannot be written.
    """
    try:
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(("delta_hz", "F", "M", "population"))
            for delta in sorted(populations_by_delta):
                for (F, M), p in populations_by_delta[delta].items():
                    writer.writerow([_format(delta), _format(F), _format(M), _format(p)])
    except OSError as e:
        raise OutputError(Path(path), str(e)) from e
    return Path(path)


def emit_plots(
    rows: list[SweepRow], outputs: Iterable[OutputKind], out_dir: Path, csv_name: str = "sweep.csv"
) -> Optional[Path]:
    """Write a gnuplot script for the sweep CSV.

    Light shift and linewidth share one dual-axis panel; <S_z> gets its own.
    Returns None, writing nothing, when no plottable output is selected.

    Raises:
        OutputError: If the script cannot be written.
    """
    selected = set(outputs)
    shift = OutputKind.LIGHT_SHIFT in selected
    width = OutputKind.LINEWIDTH in selected
    sz = OutputKind.SZ in selected
    if not (shift or width or sz):
        logger.info("No plottable outputs selected; skipping plot script")
        return None

    panels = int(sz) + int(shift or width)
    lines = [
        f"# {len(rows)} detuning points from {csv_name}",
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set terminal pngcairo size 900,%d" % (420 * panels),
        "set output 'sweep.png'",
        f"set multiplot layout {panels},1",
        "set xlabel 'Pump detuning (GHz)'",
    ]
    if sz:
        lines += [
            "set ylabel '<S_z>'",
            f"plot '{csv_name}' using ($1/1e9):2 with linespoints title '<S_z>'",
        ]
    if shift or width:
        plots = []
        if shift:
            lines.append("set ylabel 'Light shift (Hz)'")
            plots.append(f"'{csv_name}' using ($1/1e9):3 axes x1y1 with lines lc 'black' title 'light shift'")
        if width:
            lines += ["set y2label 'Line width (Hz)'", "set y2tics", "set ytics nomirror"]
            plots.append(f"'{csv_name}' using ($1/1e9):4 axes x1y2 with lines lc 'red' title 'line width'")
        lines.append("plot " + ", \\\n     ".join(plots))
    lines.append("unset multiplot")

    path = Path(out_dir) / "plot.gp"
    try:
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as e:
        raise OutputError(path, str(e)) from e
    return path


def summarize_sweep(result: SweepResult) -> SweepSummary:
    """Structural features of the sweep curves."""
    ok = [r for r in result.rows if r.ok]
    deltas = [r.delta for r in ok]
    sz_peaks, _ = find_local_extrema(deltas, [abs(r.mean_Sz) for r in ok])
    _, width_minima = find_local_extrema(deltas, [r.linewidth for r in ok])
    residuals = [r.residual for r in ok if math.isfinite(r.residual)]
    return SweepSummary(
        scenario=result.config.name,
        points=len(result.rows),
        failures=result.failures,
        sz_peaks=sz_peaks,
        light_shift_zero_crossings=find_zero_crossings(deltas, [r.light_shift for r in ok]),
        linewidth_minima=width_minima,
        calibration_offset=result.calibration_offset,
        max_residual=max(residuals, default=0.0),
    )


def write_report(report: SweepSummary | ValidationReport, path: Path) -> Path:
    """Write a summary or validation report as JSON.

    Raises:
        OutputError: If the file cannot be written.
    """
    try:
        Path(path).write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
    except OSError as e:
        raise OutputError(Path(path), str(e)) from e
    return Path(path)


def run_sweep(
    config: ScenarioConfig,
    settings: Optional[Settings] = None,
    out_dir: Optional[Path] = None,
    threads: Optional[int] = None,
    reference_detuning: Optional[float] = None,
    on_point: Optional[Callable[[SweepRow], None]] = None,
) -> SweepResult:
    """Run a sweep and, when out_dir is given, write all selected outputs.

    Files: sweep.csv, populations.csv, response_<delta>.csv, plot.gp and report.json.

    Raises:
        OutputError: If writing fails.
    """
    runner = SweepRunner(config, settings, threads=threads, reference_detuning=reference_detuning)
    result = runner.run(on_point=on_point)
    if out_dir is not None:
        out = Path(out_dir)
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise OutputError(out, str(e)) from e
        write_sweep_csv(result.rows, out / "sweep.csv")
        if OutputKind.POPULATIONS in config.outputs and result.populations:
            write_populations_csv(result.populations, out / "populations.csv")
        if OutputKind.RESPONSE_CURVE in config.outputs:
            for delta, curve in result.curves.items():
                write_response_csv(curve, out / response_filename(delta))
        emit_plots(result.rows, config.outputs, out)
        write_report(summarize_sweep(result), out / "report.json")
    return result


def _log_slope(x: list[float], y: list[float]) -> Optional[float]:
    pairs = [(a, b) for a, b in zip(x, y) if a > 0 and b > 0 and math.isfinite(b)]
    if len(pairs) < 2:
        return None
    lx, ly = np.log([p[0] for p in pairs]), np.log([p[1] for p in pairs])
    return float(np.polyfit(lx, ly, 1)[0])


def run_validation(
    config: ScenarioConfig,
    omega_ratios: Optional[list[float]] = None,
    settings: Optional[Settings] = None,
    on_rung: Optional[Callable[[ValidationRung], None]] = None,
) -> ValidationReport:
    """Compare effective and full steady states over a ladder of pump strengths.

    Each rung sets Ω = ratio · (Γ_sd/2 + Γ_pb). Rungs whose reference
    solve fails are reported with a status and excluded from the slope.
    """
    settings = resolve_settings(settings or get_settings(), config.solver)
    spec = config.validation
    ratios = list(omega_ratios or spec.omega_ratios)
    width = 0.5 * config.params.gamma_sd_optical + config.params.gamma_pb
    basis = build_basis(config.atom)

    ladder = [(r, r * width) for r in sorted(ratios, reverse=True)]
    if spec.include_zero_rung:
        ladder.append((0.0, 0.0))

    rungs: list[ValidationRung] = []
    for ratio, rabi in ladder:
        params = config.params.model_copy(update={"rabi_prime": rabi / math.sqrt(2.0 / 3.0)})
        rung = ValidationRung(omega_ratio=ratio, rabi=rabi)
        try:
            effective = solve_steady_state(config.atom, params, basis=basis, settings=settings)
            full = solve_full_steady_state(
                config.atom,
                params,
                basis=basis,
                settings=settings,
                method=spec.method,
                settle_time_constants=spec.settle_time_constants,
            )
            n = basis.ground_dim
            full_ground = np.real(np.diag(full.rho0))[:n]
            eff_ground = np.real(np.diag(effective.rho0))
            rung = rung.model_copy(
                update={
                    "sz_full": full.mean_Sz,
                    "sz_effective": effective.mean_Sz,
                    "error": abs(full.mean_Sz - effective.mean_Sz),
                    "population_error": float(np.abs(full_ground - eff_ground).max()),
                    "excited_population": full.excited_population,
                    "floor": full.tolerance + effective.tolerance,
                }
            )
            if rabi > 0 and not rung.ok_for_slope:
                logger.warning(
                    f"Ω/width = {ratio:g}: error {rung.error:.2e} is below the round-off floor "
                    f"{rung.floor:.2e} and is left out of the slope"
                )
        except OPMError as e:
            logger.error(f"Validation rung Ω/width = {ratio:g} failed: {e}")
            rung = rung.model_copy(update={"status": failure_status(e)})
        rungs.append(rung)
        if on_rung:
            on_rung(rung)

    good = [r for r in rungs if r.ok_for_slope]
    report = ValidationReport(
        scenario=config.name,
        nuclear_spin_I=config.atom.nuclear_spin_I,
        rungs=rungs,
        slope=_log_slope([r.rabi for r in good], [r.error for r in good]),
        excited_slope=_log_slope([r.rabi for r in good], [r.excited_population for r in good]),
    )
    logger.info(f"Validation {config.name}: slope {report.slope}")
    return report
