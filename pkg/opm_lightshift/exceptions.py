"""Error types raised by the simulator.

Every error derives from OPMError and from the builtin exception that best
describes it, so callers may catch either. The CLI maps them to exit codes.
"""

from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np


class OPMError(Exception):
    """Base class for all simulator errors."""


class ConfigError(OPMError, ValueError):
    """Invalid scenario, preset name or command-line selection."""


class SingularDetuningError(OPMError, ValueError):
    """A complex detuning vanishes (Γ_pb = 0 with Δ_FF' = 0)."""

    def __init__(self, pair: tuple[str, str], detuning: float) -> None:
        self.pair = pair
        self.detuning = detuning
        super().__init__(
            f"Detuning Δ_{pair[0]}{pair[1]} = {detuning:g} Hz is singular without pressure broadening"
        )


class MeanFieldRangeError(OPMError, ValueError):
    """A supplied mean spin lies outside the physical range |<S>| <= 1/2."""


class ConvergenceError(OPMError, RuntimeError):
    """The self-consistent steady-state iteration did not converge.

    Attributes:
        history: Successive mean-field values <S_z> visited by the iteration
    """

    def __init__(self, message: str, history: Sequence[float]) -> None:
        self.history = list(history)
        super().__init__(message)


class IntegrationError(OPMError, RuntimeError):
    """Time integration of the full master equation failed.

    Attributes:
        time: Time (s) of the last accepted state
        last_state: Last valid density matrix
    """

    def __init__(self, message: str, time: float, last_state: np.ndarray) -> None:
        self.time = time
        self.last_state = last_state
        super().__init__(message)


class SingularSystemError(OPMError, RuntimeError):
    """The linear-response system cannot be solved at a given RF frequency."""

    def __init__(self, frequency_hz: float) -> None:
        self.frequency_hz = frequency_hz
        super().__init__(f"Response system is singular at {frequency_hz:.6g} Hz (undamped mode)")


class ResonanceWindowError(OPMError, RuntimeError):
    """No zero crossing of Re<S_x+> was found inside the scan window.

    Attributes:
        frequencies: Scanned frequencies (Hz)
        values: Complex response at each scanned frequency
    """

    def __init__(self, message: str, frequencies: Any, values: Any) -> None:
        self.frequencies = np.asarray(frequencies)
        self.values = np.asarray(values)
        super().__init__(message)


class OutputError(OPMError, OSError):
    """Writing a result file failed."""

    def __init__(self, path: Path, reason: Optional[str] = None) -> None:
        self.path = path
        detail = f": {reason}" if reason else ""
        super().__init__(f"Could not write {path}{detail}")
