"""Pytest configuration and fixtures for opm-lightshift tests."""

from pathlib import Path
from typing import Generator

import pytest

from opm_lightshift.config import Settings, reset_settings
from opm_lightshift.models import (
    AtomSpec,
    ExperimentParams,
    OutputKind,
    ScenarioConfig,
    SweepSpec,
)
from opm_lightshift.presets import ATOMS
from opm_lightshift.spin_basis import HyperfineBasis, build_basis


@pytest.fixture
def spin_half_atom() -> AtomSpec:
    """Small atom with I = 1/2 (4 ground levels) for fast solves."""
    return AtomSpec(name="toy-half", nuclear_spin_I=0.5, delta_S=1e9, delta_P=0.3e9)


@pytest.fixture
def rb87() -> AtomSpec:
    """Rubidium-87, I = 3/2."""
    return ATOMS["rb87"]


@pytest.fixture
def half_basis(spin_half_atom: AtomSpec) -> HyperfineBasis:
    return build_basis(spin_half_atom)


@pytest.fixture
def rb87_basis(rb87: AtomSpec) -> HyperfineBasis:
    return build_basis(rb87)


@pytest.fixture
def pumped_params() -> ExperimentParams:
    """Weak resonant pumping with ω_L well above the line width."""
    return ExperimentParams(
        rabi_prime=1e6,
        detuning=0.0,
        gamma_pb=0.5e9,
        gamma_sd_optical=0.0,
        gamma_se=100.0,
        gamma_sd_collision=10.0,
        B_z=0.01,
        B_x=1e-7,
    )


@pytest.fixture
def dark_params(pumped_params: ExperimentParams) -> ExperimentParams:
    """Same scenario with the pump switched off."""
    return pumped_params.model_copy(update={"rabi_prime": 0.0})


@pytest.fixture
def test_settings() -> Generator[Settings, None, None]:
    """Default solver settings independent of the environment."""
    reset_settings()
    settings = Settings(output_dir=Path("output"), threads=1)
    yield settings
    reset_settings()


@pytest.fixture
def toy_scenario(spin_half_atom: AtomSpec, pumped_params: ExperimentParams) -> ScenarioConfig:
    """Three-point sweep without resonance extraction."""
    return ScenarioConfig(
        name="toy",
        atom=spin_half_atom,
        params=pumped_params,
        sweep=SweepSpec(delta_min=-1e9, delta_max=1e9, npoints=3),
        outputs=[OutputKind.SZ, OutputKind.POPULATIONS],
    )


@pytest.fixture
def toy_scenario_file(toy_scenario: ScenarioConfig, tmp_path: Path) -> Path:
    """Scenario JSON written to a temporary file."""
    path = tmp_path / "toy.json"
    path.write_text(toy_scenario.to_json(), encoding="utf-8")
    return path
