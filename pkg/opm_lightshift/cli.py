"""Typer CLI interface with Rich terminal output.

Provides commands:
- steady: Self-consistent steady state at one detuning
- response: RF response curve, resonance frequency and linewidth
- sweep: Detuning sweep with CSV, plot script and report output
- validate: Effective vs full master equation over a weak-driving ladder
- presets: List built-in scenarios
- config: View configuration
"""

import json
import logging
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Optional

import typer
from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.progress import BarColumn, Progress, SpinnerColumn, TextColumn
from rich.table import Table

from opm_lightshift import __version__
from opm_lightshift.analytics import analytic_estimates, spin_temperature_test
from opm_lightshift.config import Settings, get_settings
from opm_lightshift.exceptions import (
    ConfigError,
    ConvergenceError,
    IntegrationError,
    OutputError,
    ResonanceWindowError,
    SingularDetuningError,
    SingularSystemError,
)
from opm_lightshift.linear_response import extract_resonance
from opm_lightshift.models import ScenarioConfig, SweepRow, ValidationRung
from opm_lightshift.presets import PRESETS, get_preset, list_presets
from opm_lightshift.steady_state import manifold_populations, populations, solve_steady_state
from opm_lightshift.sweep import (
    resolve_settings,
    response_filename,
    run_sweep,
    run_validation,
    summarize_sweep,
    write_report,
    write_response_csv,
)

# Create CLI app
app = typer.Typer(
    name="opm",
    help="Simulate light shift and light narrowing in optically pumped alkali magnetometers.",
    add_completion=False,
    no_args_is_help=True,
)

# Rich console for pretty output
console = Console()

EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_IO = 4

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


# ==================== HELPER FUNCTIONS ====================


@contextmanager
def handle_errors() -> Iterator[None]:
    """Translate simulator errors into exit codes."""
    try:
        yield
    except (ConfigError, ValidationError) as e:
        console.print(f"[bold red]Configuration error:[/bold red] {e}")
        raise typer.Exit(EXIT_CONFIG)
    except (
        ConvergenceError,
        IntegrationError,
        ResonanceWindowError,
        SingularSystemError,
        SingularDetuningError,
    ) as e:
        console.print(f"[bold red]Solver failed:[/bold red] {e}")
        raise typer.Exit(EXIT_SOLVER)
    except (OutputError, OSError) as e:
        console.print(f"[bold red]I/O error:[/bold red] {e}")
        raise typer.Exit(EXIT_IO)


def load_scenario(
    config_path: Optional[Path], preset: Optional[str], default: str = "cs-100torr"
) -> ScenarioConfig:
    """Scenario from --config or --preset, falling back to a default preset.

    Raises:
        ConfigError: If both are given or either is invalid.
    """
    if config_path is not None and preset is not None:
        raise ConfigError("Use either --config or --preset, not both")
    if config_path is not None:
        return ScenarioConfig.from_json_file(config_path)
    return get_preset(preset or default)


def parse_calibration(value: Optional[str]) -> tuple[bool, Optional[float]]:
    """Parse --calibrate: (explicit, Δ_ref). 'off' disables calibration.

    Raises:
        ConfigError: If the value is neither 'off' nor a number.
    """
    if value is None:
        return False, None
    if value.strip().lower() == "off":
        return True, None
    try:
        return True, float(value)
    except ValueError:
        raise ConfigError(f"--calibrate expects a detuning in Hz or 'off', got '{value}'") from None


def scenario_settings(scenario: ScenarioConfig) -> Settings:
    return resolve_settings(get_settings(), scenario.solver)


def format_hz(value: float) -> str:
    """Format a frequency with a readable unit."""
    magnitude = abs(value)
    if magnitude >= 1e9:
        return f"{value / 1e9:.4f} GHz"
    if magnitude >= 1e6:
        return f"{value / 1e6:.4f} MHz"
    if magnitude >= 1e3:
        return f"{value / 1e3:.4f} kHz"
    return f"{value:.4f} Hz"


def create_population_table(pops: dict[tuple[float, float], float]) -> Table:
    """Create a Rich table of ground populations, one row per M."""
    table = Table(title="Ground populations", header_style="bold cyan", border_style="blue")
    a = max(F for F, _ in pops)
    b = min(F for F, _ in pops)
    table.add_column("M", justify="right")
    table.add_column(f"F={a:g}", justify="right")
    table.add_column(f"F={b:g}", justify="right")
    for M in sorted({M for _, M in pops}, reverse=True):
        pa = pops.get((a, M))
        pb = pops.get((b, M))
        table.add_row(
            f"{M:g}",
            f"{pa:.6f}" if pa is not None else "-",
            f"{pb:.6f}" if pb is not None else "-",
        )
    return table


def create_sweep_table(rows: list[SweepRow], title: str) -> Table:
    """Create a Rich table for sweep rows."""
    table = Table(title=title, header_style="bold cyan", border_style="blue", title_style="bold white")
    table.add_column("Δ", justify="right")
    table.add_column("<S_z>", justify="right")
    table.add_column("Light shift", justify="right")
    table.add_column("Line width", justify="right")
    table.add_column("Iter", justify="right", style="dim")
    table.add_column("Status")
    for row in rows:
        status = "[green]ok[/green]" if row.ok else f"[red]{row.status}[/red]"
        table.add_row(
            format_hz(row.delta),
            f"{row.mean_Sz:+.6f}",
            f"{row.light_shift:+.4f} Hz",
            f"{row.linewidth:.4f} Hz",
            str(row.iterations),
            status,
        )
    return table


# ==================== COMMANDS ====================


@app.command()
def steady(
    config_path: Optional[Path] = typer.Option(None, "--config", "-c", help="Scenario JSON file"),
    preset: Optional[str] = typer.Option(None, "--preset", "-p", help="Built-in scenario name"),
    delta: Optional[float] = typer.Option(None, "--delta", "-d", help="Pump detuning in Hz (default: scenario)"),
    output_json: bool = typer.Option(False, "--json", "-j", help="Output results as JSON"),
) -> None:
    """Solve the self-consistent steady state at one detuning."""
    with handle_errors():
        scenario = load_scenario(config_path, preset)
        params = scenario.params if delta is None else scenario.params.with_detuning(delta)
        solution = solve_steady_state(scenario.atom, params, settings=scenario_settings(scenario))
        pops = populations(solution)
        totals = manifold_populations(solution)
        temperature = spin_temperature_test(pops)
        estimates = analytic_estimates(scenario.atom, params, solution.mean_Sz)

    if output_json:
        output = {
            "scenario": scenario.name,
            "delta_hz": params.detuning,
            "mean_Sz": solution.mean_Sz,
            "iterations": solution.iterations,
            "residual": solution.residual,
            "degenerate": solution.degenerate,
            "multiplet_populations": {f"{F:g}": p for F, p in totals.items()},
            "populations": [{"F": F, "M": M, "p": p} for (F, M), p in pops.items()],
            "spin_temperature": temperature.model_dump(),
            "analytic": estimates.model_dump(),
        }
        console.print_json(json.dumps(output))
        return

    summary = "\n".join([
        f"[bold]Scenario:[/bold] {scenario.name} ({scenario.atom.name}, I={scenario.atom.nuclear_spin_I:g})",
        f"[bold]Detuning:[/bold] {format_hz(params.detuning)}",
        f"[bold]<S_z>:[/bold] {solution.mean_Sz:+.9f}",
        f"[bold]Iterations:[/bold] {solution.iterations} ({solution.method})",
        f"[bold]Residual:[/bold] {solution.residual:.2e}",
        "[bold]Multiplets:[/bold] " + ", ".join(f"F={F:g}: {p:.6f}" for F, p in totals.items()),
        "[bold]Spin temperature:[/bold] "
        + ("[green]yes[/green]" if temperature.is_spin_temperature else "[yellow]no[/yellow]")
        + f" (max deviation {temperature.max_deviation:.2e})",
    ])
    console.print(Panel(summary, title="Steady state", border_style="cyan"))
    console.print(create_population_table(pops))
    if params.weak_driving_warning:
        console.print("[yellow]Weak-driving condition Ω ≪ Γ_sd/2 + Γ_pb is not satisfied[/yellow]")


@app.command()
def response(
    config_path: Optional[Path] = typer.Option(None, "--config", "-c", help="Scenario JSON file"),
    preset: Optional[str] = typer.Option(None, "--preset", "-p", help="Built-in scenario name"),
    delta: Optional[float] = typer.Option(None, "--delta", "-d", help="Pump detuning in Hz (default: scenario)"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Directory for response_<delta>.csv"),
    full_space: bool = typer.Option(
        False, "--full-space", help="Solve on all kept coherences instead of the co-rotating ones"
    ),
) -> None:
    """Compute the RF response and extract the resonance and linewidth."""
    with handle_errors():
        scenario = load_scenario(config_path, preset)
        settings = scenario_settings(scenario)
        params = scenario.params if delta is None else scenario.params.with_detuning(delta)
        solution = solve_steady_state(scenario.atom, params, settings=settings)
        curve = extract_resonance(
            scenario.atom, params, solution, settings=settings, restrict=False if full_space else None
        )
        estimates = analytic_estimates(scenario.atom, params, solution.mean_Sz)
        written = None
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
            written = write_response_csv(curve, out / response_filename(params.detuning))

    table = Table(title=f"Resonance at Δ = {format_hz(params.detuning)}", header_style="bold cyan")
    table.add_column("Quantity", style="bold")
    table.add_column("Numerical", justify="right")
    table.add_column("Analytic", justify="right", style="dim")
    table.add_row("<S_z>", f"{solution.mean_Sz:+.6f}", "")
    table.add_row("ω0", f"{curve.omega_zero:.4f} Hz", f"{estimates.tilde_omega:.4f} Hz")
    table.add_row("ω0 - ω_L", f"{curve.light_shift:+.4f} Hz", f"{estimates.delta_omega_ls:+.4f} Hz")
    table.add_row("Line width", f"{curve.linewidth:.4f} Hz", f"{estimates.tilde_gamma:.4f} Hz")
    console.print(table)
    if written is not None:
        console.print(f"[green]✓[/green] Wrote {written}")


@app.command()
def sweep(
    config_path: Optional[Path] = typer.Option(None, "--config", "-c", help="Scenario JSON file"),
    preset: Optional[str] = typer.Option(None, "--preset", "-p", help="Built-in scenario name"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Output directory (default: from config)"),
    threads: Optional[int] = typer.Option(None, "--threads", "-t", help="Worker processes", min=1),
    calibrate: Optional[str] = typer.Option(
        None, "--calibrate", help="Reference detuning Δ_ref in Hz, or 'off'"
    ),
    show: int = typer.Option(0, "--show", "-s", help="Print the first N rows as a table"),
) -> None:
    """Sweep the pump detuning and write sweep.csv, plot.gp and report.json."""
    with handle_errors():
        scenario = load_scenario(config_path, preset)
        settings = get_settings()
        explicit, reference = parse_calibration(calibrate)
        if explicit and reference is None:
            scenario = scenario.model_copy(
                update={"calibration": scenario.calibration.model_copy(update={"mode": "none"})}
            )
        out_dir = out or settings.output_dir
        total = scenario.sweep.npoints

        with Progress(
            SpinnerColumn(),
            TextColumn("[progress.description]{task.description}"),
            BarColumn(),
            TextColumn("[progress.percentage]{task.percentage:>3.0f}%"),
            console=console,
            transient=True,
        ) as progress:
            task = progress.add_task(f"[cyan]Sweeping {scenario.name}...", total=total)

            def on_point(row: SweepRow) -> None:
                progress.update(task, advance=1)

            result = run_sweep(
                scenario,
                settings=settings,
                out_dir=out_dir,
                threads=threads,
                reference_detuning=reference,
                on_point=on_point,
            )
        summary = summarize_sweep(result)

    console.print(Panel(
        "\n".join([
            f"[bold]Points:[/bold] {summary.points} ({summary.failures} failed)",
            f"[bold]<S_z> peaks at:[/bold] {', '.join(format_hz(d) for d in summary.sz_peaks) or '-'}",
            "[bold]Light-shift zero crossings:[/bold] "
            + (", ".join(format_hz(d) for d in summary.light_shift_zero_crossings) or "-"),
            f"[bold]Output:[/bold] {out_dir}",
        ]),
        title=f"Sweep {scenario.name}",
        border_style="cyan",
    ))
    if show:
        console.print(create_sweep_table(result.rows[:show], "First rows"))


@app.command()
def validate(
    config_path: Optional[Path] = typer.Option(None, "--config", "-c", help="Scenario JSON file"),
    preset: Optional[str] = typer.Option(None, "--preset", "-p", help="Built-in scenario name"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Directory for report.json"),
    ratios: Optional[str] = typer.Option(
        None, "--ratios", "-r", help="Comma-separated Ω/(Γ_sd/2 + Γ_pb) values"
    ),
) -> None:
    """Compare the effective equation with the full master equation."""
    with handle_errors():
        scenario = load_scenario(config_path, preset, default="rb87-validation")
        ladder = None
        if ratios:
            try:
                ladder = [float(r) for r in ratios.split(",") if r.strip()]
            except ValueError:
                raise ConfigError(f"--ratios expects comma-separated numbers, got '{ratios}'") from None
            if not ladder or any(r <= 0 for r in ladder):
                raise ConfigError("--ratios must contain positive numbers")

        def on_rung(rung: ValidationRung) -> None:
            console.print(f"[dim]Ω/width = {rung.omega_ratio:g}: {rung.status}[/dim]")

        report = run_validation(scenario, ladder, settings=get_settings(), on_rung=on_rung)
        written = None
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
            written = write_report(report, out / "report.json")

    table = Table(title=f"Validation {scenario.name}", header_style="bold cyan")
    table.add_column("Ω/width", justify="right")
    table.add_column("Ω", justify="right")
    table.add_column("<S_z> full", justify="right")
    table.add_column("<S_z> effective", justify="right")
    table.add_column("Error", justify="right")
    table.add_column("Excited pop.", justify="right", style="dim")
    for rung in report.rungs:
        table.add_row(
            f"{rung.omega_ratio:g}",
            format_hz(rung.rabi),
            f"{rung.sz_full:+.9f}",
            f"{rung.sz_effective:+.9f}",
            f"{rung.error:.2e}",
            f"{rung.excited_population:.2e}",
        )
    console.print(table)
    if report.slope is None:
        console.print("[yellow]Not enough rungs for a log-log slope[/yellow]")
    else:
        style = "green" if report.slope_ok else "yellow"
        console.print(f"Log-log error slope: [{style}]{report.slope:.3f}[/{style}]")
    if written is not None:
        console.print(f"[green]✓[/green] Wrote {written}")


@app.command()
def presets(
    output_json: bool = typer.Option(False, "--json", "-j", help="Output as JSON"),
) -> None:
    """List built-in scenarios."""
    if output_json:
        console.print_json(json.dumps({name: json.loads(PRESETS[name].to_json()) for name in list_presets()}))
        return

    table = Table(title="Presets", header_style="bold cyan", border_style="blue")
    table.add_column("Name", style="bold")
    table.add_column("Atom")
    table.add_column("Ω", justify="right")
    table.add_column("Γ_pb", justify="right")
    table.add_column("γ", justify="right")
    table.add_column("Sweep", justify="right")
    for name in list_presets():
        p = PRESETS[name]
        table.add_row(
            name,
            f"{p.atom.name} (I={p.atom.nuclear_spin_I:g})",
            format_hz(p.params.rabi),
            format_hz(p.params.gamma_pb),
            format_hz(p.params.gamma_total),
            f"{format_hz(p.sweep.delta_min)} … {format_hz(p.sweep.delta_max)} ({p.sweep.npoints})",
        )
    console.print(table)


@app.command()
def config() -> None:
    """View current configuration."""
    settings = get_settings()

    table = Table(title="Configuration", show_header=True, header_style="bold cyan")
    table.add_column("Setting", style="bold")
    table.add_column("Value")
    table.add_column("Source", style="dim")
    for name, info in Settings.model_fields.items():
        table.add_row(info.description or name, str(getattr(settings, name)), f"OPM_{name.upper()}")

    console.print(table)
    console.print("\n[dim]Configure via environment variables or .env file[/dim]")


def version_callback(value: bool) -> None:
    """Print version and exit."""
    if value:
        console.print(f"opm-lightshift version {__version__}")
        raise typer.Exit()


@app.callback()
def main(
    version: bool = typer.Option(
        None, "--version", "-v",
        callback=version_callback,
        is_eager=True,
        help="Show version and exit",
    ),
    log_level: Optional[str] = typer.Option(
        None, "--log-level", "-l",
        help="DEBUG, INFO, WARNING or ERROR (default: from config)",
    ),
) -> None:
    """opm-lightshift - Light shift and light narrowing of alkali-vapor magnetometers.

    Solve the effective ground-state master equation, extract the magnetic
    resonance from its linear response and sweep the pump detuning.

    Get started:

        opm presets                       # Built-in scenarios

        opm steady --preset cs-100torr    # Polarization at Δ = 0

        opm sweep --preset cs-700torr     # Light shift vs detuning
    """
    level = (log_level or get_settings().log_level).upper()
    if level not in LOG_LEVELS:
        console.print(f"[bold red]Configuration error:[/bold red] unknown log level '{log_level}'")
        raise typer.Exit(EXIT_CONFIG)
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )


if __name__ == "__main__":
    app()
