"""Built-in atoms and scenarios.

Cesium scenarios describe a vapor cell with 100 torr or 700 torr of
nitrogen buffer gas pumped on the D1 line. The rubidium-87 scenario has a
small nuclear spin and is used to validate the effective equation against
the full one. Its spin-destruction rate keeps the pumping rate well below
the ground-state relaxation over the whole validation ladder, so <S_z> and
the excited population both grow as Ω².
"""

import math

from opm_lightshift.exceptions import ConfigError
from opm_lightshift.models import (
    AtomSpec,
    ExperimentParams,
    OutputKind,
    ScenarioConfig,
    SweepSpec,
    ValidationSpec,
)

ATOMS: dict[str, AtomSpec] = {
    "cs133": AtomSpec(name="cs133", nuclear_spin_I=3.5, delta_S=9.193e9, delta_P=1.168e9),
    "rb87": AtomSpec(name="rb87", nuclear_spin_I=1.5, delta_S=6.835e9, delta_P=0.8145e9),
}


def _rabi_prime(rabi: float) -> float:
    return rabi / math.sqrt(2.0 / 3.0)


def _cesium_params(**overrides: float) -> ExperimentParams:
    values: dict[str, float] = {
        "rabi_prime": _rabi_prime(4.1e6),
        "detuning": 0.0,
        "gamma_pb": 0.6e9,
        "gamma_sd_optical": 4.56e6,
        "gamma_se": 1310.0,
        "gamma_sd_collision": 220.0,
        "B_z": 0.1,
        "B_x": 3e-5,
    }
    values.update(overrides)
    return ExperimentParams(**values)  # type: ignore[arg-type]


_CESIUM_SWEEP = SweepSpec(delta_min=-5e9, delta_max=15e9, npoints=60)
_STANDARD_OUTPUTS = [OutputKind.SZ, OutputKind.LIGHT_SHIFT, OutputKind.LINEWIDTH]

PRESETS: dict[str, ScenarioConfig] = {
    "cs-100torr": ScenarioConfig(
        name="cs-100torr",
        atom=ATOMS["cs133"],
        params=_cesium_params(),
        sweep=_CESIUM_SWEEP,
        outputs=_STANDARD_OUTPUTS,
    ),
    "cs-700torr": ScenarioConfig(
        name="cs-700torr",
        atom=ATOMS["cs133"],
        params=_cesium_params(gamma_pb=4.2e9, gamma_sd_collision=340.0),
        sweep=_CESIUM_SWEEP,
        outputs=_STANDARD_OUTPUTS,
    ),
    "fig5": ScenarioConfig(
        name="fig5",
        atom=ATOMS["cs133"],
        params=_cesium_params(gamma_pb=0.2e9, rabi_prime=_rabi_prime(0.5e6)),
        sweep=SweepSpec(delta_min=-3e9, delta_max=12e9, npoints=151),
        outputs=[OutputKind.LIGHT_SHIFT, OutputKind.LINEWIDTH],
    ),
    "rb87-validation": ScenarioConfig(
        name="rb87-validation",
        atom=ATOMS["rb87"],
        params=ExperimentParams(
            rabi_prime=_rabi_prime(0.6e6),
            detuning=0.0,
            gamma_pb=0.6e9,
            gamma_sd_optical=0.0,
            gamma_se=1310.0,
            gamma_sd_collision=2.0e6,
            B_z=0.1,
            B_x=3e-5,
        ),
        sweep=SweepSpec(delta_min=-2e9, delta_max=8e9, npoints=21),
        outputs=[OutputKind.SZ, OutputKind.POPULATIONS],
        validation=ValidationSpec(omega_ratios=[1e-2, 3e-3, 1e-3]),
    ),
}

# Alternative names accepted by get_preset.
PRESET_ALIASES: dict[str, str] = {"cs-narrow-line": "fig5"}


def list_presets() -> list[str]:
    return sorted(PRESETS)


def get_preset(name: str) -> ScenarioConfig:
    """Look up a scenario by name.

    Raises:
        ConfigError: If no preset has that name.
    """
    try:
        return PRESETS[PRESET_ALIASES.get(name, name)]
    except KeyError:
        raise ConfigError(
            f"Unknown preset '{name}'. Available: {', '.join(list_presets())}"
        ) from None


def get_atom(name: str) -> AtomSpec:
    """Look up an atom by name.

    Raises:
        ConfigError: If the atom is unknown.
    """
    try:
        return ATOMS[name]
    except KeyError:
        raise ConfigError(f"Unknown atom '{name}'. Available: {', '.join(sorted(ATOMS))}") from None
