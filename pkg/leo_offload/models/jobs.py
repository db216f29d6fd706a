"""
Data models for queued evaluation jobs.

A sweep is split into cells (axis value x policy x seed); each cell becomes a
QueuedJob processed by the evaluation queue.
"""

from dataclasses import asdict, dataclass
from enum import Enum
from typing import Any, Dict, Optional


class JobStatus(Enum):
    """Enumeration of job processing statuses."""
    QUEUED = "queued"
    PROCESSING = "processing"
    COMPLETED = "completed"
    FAILED = "failed"
    CANCELLED = "cancelled"


@dataclass(frozen=True)
class SweepCell:
    """One (axis value, policy, seed) evaluation of a sweep."""
    axis: str
    value: float
    policy: str
    seed: int

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class QueuedJob:
    """Represents a job in the processing queue."""
    id: str
    index: int  # submission order, used to merge results deterministically
    payload: Any
    timestamp: str
    status: JobStatus
    result: Optional[Any] = None
    error: Optional[str] = None
    processing_started_at: Optional[str] = None
    processing_completed_at: Optional[str] = None

    @property
    def finished(self) -> bool:
        return self.status in (JobStatus.COMPLETED, JobStatus.FAILED, JobStatus.CANCELLED)
