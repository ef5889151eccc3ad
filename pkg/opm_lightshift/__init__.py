"""opm-lightshift - Light shift and light narrowing in optically pumped alkali magnetometers."""

__version__ = "0.1.0"

from opm_lightshift.models import (
    AtomSpec,
    ExperimentParams,
    ScenarioConfig,
    SweepRow,
)

__all__ = [
    "__version__",
    "AtomSpec",
    "ExperimentParams",
    "ScenarioConfig",
    "SweepRow",
]
