"""
Event-driven reference enumerator for schedule timelines.

Replays a schedule as timed events on a heap: the uplink serves offloaded
tasks one at a time in schedule order, every satellite keeps a FIFO queue of
uploaded tasks in front of its single core, finished results hop over the
ISL and are downloaded from the landing satellite. Visibility waits, hop
choice and the objective are worked out here from the model rules; only the
kinematics and link primitives are shared with ``timeline.evaluate_schedule``,
which this module cross-checks.
"""

import heapq
import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Deque, Dict, List, Optional, Tuple

from ..models.scenario import ScenarioConfig
from ..models.schedule import EvaluationReport, PrivacyRecord, Schedule, TaskTimeline, infeasible_report
from .geometry import ENTRY_PAD_S, TWO_PI, link_at, satellite_angle


class EventKind(IntEnum):
    UPLINK_FREE = 0
    UPLOAD_DONE = 1
    COMPUTE_DONE = 2
    RESULT_LANDED = 3
    DOWNLOAD_DONE = 4


@dataclass
class _Job:
    rank: int
    task_id: int
    location: int
    redundancy: int
    size_mb: float
    bits: float = 0.0
    upload_start: float = 0.0
    upload_end: float = 0.0
    comp_start: float = 0.0
    comp_end: float = 0.0
    migrate_end: float = 0.0
    download_end: float = 0.0
    hops: int = 0
    landing: Optional[int] = None
    upload_seconds: float = 0.0
    gain: Optional[float] = None
    ber: Optional[float] = None


@dataclass
class _Server:
    queue: Deque[_Job] = field(default_factory=deque)
    busy: bool = False


def _on_arc(gamma: float, half_angle: float) -> bool:
    return gamma <= half_angle or TWO_PI - gamma <= half_angle


def arc_entry(sat: int, now: float, cfg: ScenarioConfig) -> Optional[float]:
    """Instant the satellite is next on the visible arc, or None past the wait horizon."""
    half_angle = cfg.visibility_half_angle_rad
    gamma = satellite_angle(sat, now, cfg)
    if _on_arc(gamma, half_angle):
        return now
    # angle still to sweep before the leading edge of the arc
    remaining = gamma - half_angle if cfg.clockwise else TWO_PI - half_angle - gamma
    wait = remaining / cfg.angular_speed + ENTRY_PAD_S
    if wait > cfg.visibility_horizon_s:
        return None
    return now + wait


def landing_satellite(sat: int, now: float, cfg: ScenarioConfig) -> Optional[Tuple[int, int]]:
    """
    Closest visible satellite along the hop direction, as (index, hops).

    Results on the (0, pi) side travel towards lower indices.
    """
    m = cfg.num_satellites
    half_angle = cfg.visibility_half_angle_rad
    towards_lower = 0.0 < satellite_angle(sat, now, cfg) < math.pi
    best: Optional[Tuple[int, int]] = None
    for k in range(m):
        if not _on_arc(satellite_angle(k, now, cfg), half_angle):
            continue
        hops = (sat - k) % m if towards_lower else (k - sat) % m
        if best is None or hops < best[1]:
            best = (k, hops)
    return best


class EventSimulator:
    """Single-use simulator for one (schedule, scenario) pair."""

    def __init__(self, schedule: Schedule, cfg: ScenarioConfig):
        schedule.validate(cfg)
        self.cfg = cfg
        self.jobs: List[_Job] = []
        for rank, d in enumerate(schedule.decisions):
            size = cfg.sizes_mb[d.task_id]
            job = _Job(rank, d.task_id, d.location, d.redundancy if d.location else 0, size)
            if d.location:
                job.bits = size * (1.0 + cfg.redundancy_ratio * job.redundancy) * 8e6
            self.jobs.append(job)
        self.pending_uploads: Deque[_Job] = deque(j for j in self.jobs if j.location)
        self.servers: Dict[int, _Server] = {j: _Server() for j in range(cfg.num_satellites)}
        self._events: List[Tuple[float, int, int, int]] = []
        self._seq = itertools.count()
        self.uplink_end = 0.0
        self.failure: Optional[str] = None

    def _push(self, t: float, kind: EventKind, rank: int = -1) -> None:
        heapq.heappush(self._events, (t, next(self._seq), int(kind), rank))

    def _start_upload(self, now: float) -> None:
        if not self.pending_uploads:
            self.uplink_end = now
            return
        job = self.pending_uploads.popleft()
        sat = job.location - 1
        start = arc_entry(sat, now, self.cfg)
        if start is None:
            self.failure = f"satellite {sat} out of view for task {job.task_id}"
            return
        link = link_at(sat, start, self.cfg)
        job.upload_start = start
        job.upload_seconds = job.bits / link.rate
        job.upload_end = start + job.upload_seconds
        job.gain, job.ber = link.gain, link.ber
        self._push(job.upload_end, EventKind.UPLOAD_DONE, job.rank)

    def _serve(self, sat: int, now: float) -> None:
        server = self.servers[sat]
        if server.busy or not server.queue:
            return
        job = server.queue.popleft()
        job.comp_start = now
        job.comp_end = now + job.size_mb / self.cfg.sat_speed_mbps(sat)
        server.busy = True
        self._push(job.comp_end, EventKind.COMPUTE_DONE, job.rank)

    def run(self) -> EvaluationReport:
        self._push(0.0, EventKind.UPLINK_FREE)
        while self._events and self.failure is None:
            now, _, kind, rank = heapq.heappop(self._events)
            job = self.jobs[rank] if rank >= 0 else None

            if kind == EventKind.UPLINK_FREE:
                self._start_upload(now)
            elif kind == EventKind.UPLOAD_DONE:
                self._push(now, EventKind.UPLINK_FREE)
                sat = job.location - 1
                self.servers[sat].queue.append(job)
                self._serve(sat, now)
            elif kind == EventKind.COMPUTE_DONE:
                sat = job.location - 1
                self.servers[sat].busy = False
                self._serve(sat, now)
                target = landing_satellite(sat, now, self.cfg)
                if target is None:
                    self.failure = f"no satellite in view for the result of task {job.task_id}"
                    break
                job.landing, job.hops = target
                if job.hops:
                    transfer = self.cfg.result_size_ratio * job.size_mb
                    job.migrate_end = now + job.hops * transfer / self.cfg.isl_rate_mbps
                else:
                    job.migrate_end = now
                self._push(job.migrate_end, EventKind.RESULT_LANDED, job.rank)
            elif kind == EventKind.RESULT_LANDED:
                result_bits = self.cfg.result_size_ratio * job.size_mb * 8e6
                job.download_end = now + result_bits / link_at(job.landing, now, self.cfg).rate
                self._push(job.download_end, EventKind.DOWNLOAD_DONE, job.rank)

        if self.failure is not None:
            return infeasible_report([], self.failure, self.cfg.num_satellites)

        clock = self.uplink_end
        timeline = []
        for job in self.jobs:
            if job.location:
                timeline.append(self._record(job))
                continue
            start = clock
            clock = start + job.size_mb / self.cfg.ue_compute_speed_mbps
            timeline.append(TaskTimeline(
                task_id=job.task_id, location=0, redundancy=0, size_mb=job.size_mb,
                upload_start=start, upload_end=start, comp_start=start,
                comp_end=clock, migrate_end=clock, download_end=clock,
            ))

        busy = [0.0] * self.cfg.num_satellites
        for job in self.jobs:
            if job.location:
                busy[job.location - 1] = max(busy[job.location - 1], job.comp_end)
        return self._report(timeline, clock, busy)

    def _report(self, timeline: List[TaskTimeline], local_end: float, busy: List[float]) -> EvaluationReport:
        """Objective terms and constraint checks from the replayed jobs."""
        cfg = self.cfg
        offloaded = [job for job in self.jobs if job.location]
        local = [job for job in self.jobs if not job.location]

        total_time = max(max((job.download_end for job in offloaded), default=0.0), local_end)
        energy_comp = cfg.compute_power_w * sum(job.size_mb / cfg.ue_compute_speed_mbps for job in local)
        energy_tran = cfg.ue_tx_power_w * sum(job.upload_seconds for job in offloaded)
        energy = energy_comp + energy_tran

        # every transmitted bit must arrive intact
        log_success = 0.0
        for job in offloaded:
            if job.bits > 0.0 and job.ber > 0.0:
                log_success += job.bits * math.log1p(-job.ber)
        failure = min(1.0, max(0.0, -math.expm1(log_success)))

        omega = cfg.channel_threshold_linear
        usage, location, weighted = [], [], []
        for job in self.jobs:
            if job.location:
                clear = job.gain >= omega
                leaks = (int(job.redundancy == 1 and clear), int(not clear))
            else:
                leaks = (1, 1)
            usage.append(leaks[0])
            location.append(leaks[1])
            weighted.append(leaks[0] + cfg.privacy_weight * leaks[1])
        privacy = sum(weighted) / len(weighted) if weighted else 0.0

        return EvaluationReport(
            total_time=total_time,
            energy=energy,
            energy_comp=energy_comp,
            energy_tran=energy_tran,
            failure_prob=failure,
            privacy=privacy,
            cost=total_time + cfg.energy_weight * energy,
            feasible_time=total_time < cfg.time_threshold_s,
            feasible_reliability=failure < cfg.failure_threshold,
            feasible_privacy=privacy >= cfg.privacy_threshold,
            timeline=timeline,
            privacy_record=PrivacyRecord(
                usage=tuple(usage), location=tuple(location), per_decision=tuple(weighted), average=privacy,
            ),
            uplink_end=self.uplink_end,
            satellite_busy_until=tuple(busy),
        )

    @staticmethod
    def _record(job: _Job) -> TaskTimeline:
        return TaskTimeline(
            task_id=job.task_id,
            location=job.location,
            redundancy=job.redundancy,
            size_mb=job.size_mb,
            upload_start=job.upload_start,
            upload_end=job.upload_end,
            comp_start=job.comp_start,
            comp_end=job.comp_end,
            migrate_end=job.migrate_end,
            download_end=job.download_end,
            hops=job.hops,
            landing=job.landing,
            upload_seconds=job.upload_seconds,
            effective_bits=job.bits,
            channel_gain=job.gain,
            ber=job.ber,
        )


def simulate_schedule(schedule: Schedule, cfg: ScenarioConfig) -> EvaluationReport:
    """Evaluate a schedule with the event-driven enumerator."""
    return EventSimulator(schedule, cfg).run()
