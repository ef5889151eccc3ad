"""Configuration management using pydantic-settings.

Loads solver tolerances, output locations and run defaults from environment
variables with the OPM_ prefix, with fallback to a .env file. Scenario
physics (atom, pump, collisions, sweep grid) lives in scenario JSON files,
see opm_lightshift.models.ScenarioConfig.
"""

from pathlib import Path
from typing import Optional

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings loaded from environment variables.

    All settings can be configured via environment variables with OPM_ prefix,
    or through a .env file in the current directory.

    Example:
        OPM_THREADS=8
        OPM_MIXING=0.3
        OPM_OUTPUT_DIR=~/opm-runs
    """

    model_config = SettingsConfigDict(
        env_prefix="OPM_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
        case_sensitive=False,
    )

    # Output Settings
    output_dir: Path = Field(
        default=Path("output"),
        description="Directory for CSV, plot scripts and reports",
    )
    threads: int = Field(
        default=1,
        ge=1,
        le=256,
        description="Worker processes used for parameter sweeps",
    )
    log_level: str = Field(
        default="WARNING",
        pattern=r"^(DEBUG|INFO|WARNING|ERROR)$",
        description="Logging level installed by the CLI",
    )

    # Steady-state solver
    mixing: float = Field(
        default=0.5,
        gt=0.0,
        le=1.0,
        description="Damping α of the <S_z> fixed-point update",
    )
    max_iter: int = Field(
        default=500,
        ge=1,
        description="Maximum fixed-point iterations before giving up",
    )
    sz_tolerance: float = Field(
        default=1e-12,
        gt=0.0,
        description="Convergence threshold on successive <S_z> values",
    )
    residual_tolerance: float = Field(
        default=1e-10,
        gt=0.0,
        description="Relative residual ||Lρ|| / (||L|| ||ρ||) accepted at convergence",
    )

    # Linear response
    zero_tolerance_hz: float = Field(
        default=1e-4,
        gt=0.0,
        description="Bracket width for the Re<S_x+> zero crossing (Hz)",
    )
    extremum_tolerance_hz: float = Field(
        default=1e-3,
        gt=0.0,
        description="Location tolerance for the Re<S_x+> maximum and minimum (Hz)",
    )
    scan_points: int = Field(
        default=201,
        ge=11,
        le=20001,
        description="Points in each coarse RF-frequency scan",
    )
    restrict_coherences: bool = Field(
        default=True,
        description="Solve the response only on the co-rotating Δm = ±1 coherences",
    )

    # Full master equation integrator
    rtol: float = Field(default=1e-8, gt=0.0, description="Integrator relative tolerance")
    atol: float = Field(default=1e-10, gt=0.0, description="Integrator absolute tolerance")

    # Calibration and RF drive
    reference_detuning_hz: float = Field(
        default=1e12,
        description="Far-detuned reference Δ_ref used by light-shift calibration (Hz)",
    )
    rf_linear_ratio: float = Field(
        default=0.01,
        gt=0.0,
        le=1.0,
        description="B_x is scaled down so that γ_e B_x stays below this fraction of γ",
    )

    @field_validator("output_dir", mode="before")
    @classmethod
    def expand_output_dir(cls, v: str | Path) -> Path:
        """Expand ~ in output directory path."""
        return Path(v).expanduser()

    @field_validator("log_level", mode="before")
    @classmethod
    def upper_log_level(cls, v: str) -> str:
        """Accept lower-case level names."""
        return str(v).upper()

    def ensure_directories(self) -> None:
        """Create the output directory if it doesn't exist."""
        self.output_dir.mkdir(parents=True, exist_ok=True)


# Global settings singleton
_settings: Optional[Settings] = None


def get_settings() -> Settings:
    """Get or create settings singleton.

    Returns:
        Settings instance with values loaded from environment/config.
    """
    global _settings
    if _settings is None:
        _settings = Settings()
    return _settings


def reset_settings() -> None:
    """Reset settings singleton (useful for testing)."""
    global _settings
    _settings = None


def configure_settings(**kwargs: object) -> Settings:
    """Create settings with custom values (useful for testing).

    Args:
        **kwargs: Settings attributes to override.

    Returns:
        New Settings instance with overridden values.
    """
    global _settings
    _settings = Settings(**kwargs)  # type: ignore[arg-type]
    return _settings
