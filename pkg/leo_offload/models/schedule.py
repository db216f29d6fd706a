"""
Data models for tasks, schedules and evaluation results.

A Schedule is the policy output being costed: an ordered list of decisions,
one per task. Evaluating it yields one TaskTimeline per decision and an
EvaluationReport with the objective and the constraint checks.
"""

import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

from ..core.errors import ScheduleError
from .scenario import ScenarioConfig, mb_to_bits

LOCAL = 0


@dataclass(frozen=True)
class Task:
    """A single indivisible task and the decision taken for it."""
    id: int
    size_mb: float
    decision_flag: int = 0  # g_i: 0 = local, 1 = offloaded
    target: Optional[int] = None  # satellite index, only when offloaded
    redundancy: int = 0
    order_rank: int = 0

    def __post_init__(self):
        if self.decision_flag not in (0, 1):
            raise ScheduleError(f"Task {self.id}: decision flag must be 0 or 1")
        if (self.decision_flag == 1) != (self.target is not None):
            raise ScheduleError(f"Task {self.id}: target is set iff the task is offloaded")

    @property
    def is_offloaded(self) -> bool:
        return self.decision_flag == 1

    def effective_bits(self, cfg: ScenarioConfig) -> float:
        """Bits put on the uplink, including redundant padding for offloaded tasks."""
        if not self.is_offloaded:
            return 0.0
        return mb_to_bits(self.size_mb * (1.0 + cfg.redundancy_ratio * self.redundancy))

    def result_bits(self, cfg: ScenarioConfig) -> float:
        """Bits returned over the backhaul (redundancy is not part of the payload)."""
        return mb_to_bits(cfg.result_size_ratio * self.size_mb)


@dataclass(frozen=True)
class Decision:
    """One (task, location, redundancy) entry; location 0 means local."""
    task_id: int
    location: int
    redundancy: int = 0

    @property
    def is_local(self) -> bool:
        return self.location == LOCAL

    @property
    def satellite(self) -> Optional[int]:
        return None if self.is_local else self.location - 1

    def as_tuple(self) -> Tuple[int, int, int]:
        return (self.task_id, self.location, self.redundancy)


@dataclass(frozen=True)
class Schedule:
    """An ordered assignment of every task to a location with a redundancy flag."""
    decisions: Tuple[Decision, ...]

    @classmethod
    def from_triples(cls, triples: Iterable[Sequence[int]]) -> 'Schedule':
        return cls(tuple(Decision(int(t), int(loc), int(red)) for t, loc, red in triples))

    @classmethod
    def all_local(cls, num_tasks: int) -> 'Schedule':
        return cls(tuple(Decision(i, LOCAL, 0) for i in range(num_tasks)))

    def __len__(self) -> int:
        return len(self.decisions)

    @property
    def key(self) -> Tuple[Tuple[int, int, int], ...]:
        """Decision sequence as nested tuples; used for lexicographic tie-breaks."""
        return tuple(d.as_tuple() for d in self.decisions)

    def validate(self, cfg: ScenarioConfig) -> None:
        """Raise ScheduleError unless this is a permutation of all task ids."""
        check_decisions(self.decisions, cfg)
        ids = sorted(d.task_id for d in self.decisions)
        if ids != list(range(cfg.num_tasks)):
            raise ScheduleError(
                f"Schedule must cover each of the {cfg.num_tasks} tasks exactly once"
            )

    def to_dict(self) -> Dict[str, Any]:
        return {'decisions': [list(d.as_tuple()) for d in self.decisions]}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Schedule':
        return cls.from_triples(data['decisions'])


def check_decisions(decisions: Sequence[Decision], cfg: ScenarioConfig) -> None:
    """Validate ids, locations and redundancy flags of a (possibly partial) decision list."""
    seen = set()
    for d in decisions:
        if not 0 <= d.task_id < cfg.num_tasks:
            raise ScheduleError(f"Task id {d.task_id} out of range 0..{cfg.num_tasks - 1}")
        if d.task_id in seen:
            raise ScheduleError(f"Task {d.task_id} appears more than once")
        seen.add(d.task_id)
        if not 0 <= d.location <= cfg.num_satellites:
            raise ScheduleError(
                f"Task {d.task_id}: location {d.location} out of range 0..{cfg.num_satellites}"
            )
        if d.redundancy not in (0, 1):
            raise ScheduleError(f"Task {d.task_id}: redundancy must be 0 or 1")


def decision_task(decision: Decision, rank: int, cfg: ScenarioConfig) -> Task:
    """Build the Task record for one decision; local decisions carry no redundancy."""
    if decision.is_local:
        return Task(id=decision.task_id, size_mb=cfg.sizes_mb[decision.task_id], order_rank=rank)
    return Task(
        id=decision.task_id,
        size_mb=cfg.sizes_mb[decision.task_id],
        decision_flag=1,
        target=decision.satellite,
        redundancy=decision.redundancy,
        order_rank=rank,
    )


@dataclass
class TaskTimeline:
    """Per-task timestamps (seconds) and link observations."""
    task_id: int
    location: int
    redundancy: int
    size_mb: float
    upload_start: float
    upload_end: float
    comp_start: float
    comp_end: float
    migrate_end: float
    download_end: float
    hops: int = 0
    landing: Optional[int] = None
    upload_seconds: float = 0.0
    effective_bits: float = 0.0
    channel_gain: Optional[float] = None  # gain at upload start
    ber: Optional[float] = None

    @property
    def is_local(self) -> bool:
        return self.location == LOCAL

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'TaskTimeline':
        return cls(**data)


@dataclass(frozen=True)
class PrivacyRecord:
    """Per-decision privacy indicators and their weighted average."""
    usage: Tuple[int, ...]
    location: Tuple[int, ...]
    per_decision: Tuple[float, ...]
    average: float

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class EvaluationReport:
    """Objective terms, constraint checks and timeline of one evaluated schedule."""
    total_time: float
    energy: float
    energy_comp: float
    energy_tran: float
    failure_prob: float
    privacy: float
    cost: float
    feasible_time: bool
    feasible_reliability: bool
    feasible_privacy: bool
    timeline: List[TaskTimeline] = field(default_factory=list)
    privacy_record: Optional[PrivacyRecord] = None
    uplink_end: float = 0.0
    satellite_busy_until: Tuple[float, ...] = ()
    infeasible_reason: Optional[str] = None

    @property
    def feasible(self) -> bool:
        return self.feasible_time and self.feasible_reliability and self.feasible_privacy

    @property
    def violations(self) -> int:
        """Number of violated constraints of the objective."""
        return sum(not flag for flag in (self.feasible_time, self.feasible_reliability, self.feasible_privacy))

    @property
    def transmission_feasible(self) -> bool:
        return self.infeasible_reason is None

    def penalized_cost(self, penalty: float) -> float:
        """C plus ``penalty`` per violated constraint; used to rank policies."""
        return self.cost + penalty * self.violations

    def summary(self) -> Dict[str, Any]:
        """Flat metric row used by CSV writers."""
        return {
            'T_total': self.total_time,
            'E': self.energy,
            'r_failure': self.failure_prob,
            'P_total': self.privacy,
            'C': self.cost,
            'feasible_time': self.feasible_time,
            'feasible_reliability': self.feasible_reliability,
            'feasible_privacy': self.feasible_privacy,
        }

    def to_dict(self) -> Dict[str, Any]:
        data = self.summary()
        data.update({
            'E_comp': self.energy_comp,
            'E_tran': self.energy_tran,
            'uplink_end': self.uplink_end,
            'satellite_busy_until': list(self.satellite_busy_until),
            'infeasible_reason': self.infeasible_reason,
            'privacy_record': self.privacy_record.to_dict() if self.privacy_record else None,
            'timeline': [t.to_dict() for t in self.timeline],
        })
        return data


def infeasible_report(timeline: List[TaskTimeline], reason: str, num_satellites: int) -> EvaluationReport:
    """Sentinel report for schedules that cannot be transmitted or returned."""
    return EvaluationReport(
        total_time=math.inf,
        energy=math.inf,
        energy_comp=math.inf,
        energy_tran=math.inf,
        failure_prob=1.0,
        privacy=0.0,
        cost=math.inf,
        feasible_time=False,
        feasible_reliability=False,
        feasible_privacy=False,
        timeline=timeline,
        satellite_busy_until=tuple([0.0] * num_satellites),
        infeasible_reason=reason,
    )
