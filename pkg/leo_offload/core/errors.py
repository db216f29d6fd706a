"""
Exception hierarchy shared by the simulator, the learners and the command layer.
"""
from typing import Any, Dict, Optional


class OffloadError(Exception):
    """Base class for every error raised on purpose by this package."""


class ScenarioError(OffloadError, ValueError):
    """A scenario file failed to parse or validate."""

    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(message)
        self.field = field


class ScheduleError(OffloadError, ValueError):
    """A schedule is not a permutation or references an unknown satellite."""


class InfeasibleTransmissionError(OffloadError):
    """The target satellite cannot be reached from the UE at the requested time."""


class MaskedActionError(OffloadError):
    """An environment step was attempted with an action the mask forbids."""


class OracleCapExceeded(OffloadError):
    """Exhaustive enumeration would exceed the configured candidate cap."""

    def __init__(self, count: int, cap: int):
        super().__init__(f"Oracle refuses to enumerate {count} schedules (cap is {cap})")
        self.count = count
        self.cap = cap


class CheckpointError(OffloadError):
    """A checkpoint is malformed or incompatible with the requested use."""


class TrainingDivergedError(OffloadError):
    """A loss became non-finite during an update."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
