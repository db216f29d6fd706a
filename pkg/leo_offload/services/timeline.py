"""
Deterministic evaluation of a schedule into a per-task timeline.

Uploads are sequential in schedule order; each satellite runs a single-core
FCFS server; local tasks run back-to-back once the uplink is done; results
are migrated over the ISL when their satellite has left the visible arc and
then sent back to the UE.
"""

from pathlib import Path
from typing import List, Optional, Sequence, Union

import pandas as pd
from loguru import logger

from ..core.errors import InfeasibleTransmissionError
from ..models.scenario import ScenarioConfig
from ..models.schedule import (
    Decision,
    EvaluationReport,
    Schedule,
    Task,
    TaskTimeline,
    check_decisions,
    decision_task,
    infeasible_report,
)
from ..utils.provenance import write_csv
from .geometry import is_visible, link_at, migration_target, next_visible_time
from .metrics import energy, privacy, reliability, total_cost


def upload_time(task: Task, j: int, t: float, cfg: ScenarioConfig) -> float:
    """
    Upload duration of a task to satellite j starting at t.

    The rate is frozen at the upload-start instant.

    Raises:
        InfeasibleTransmissionError: if satellite j is not visible at t
    """
    link = link_at(j, t, cfg)
    if not is_visible(link.angle, cfg):
        raise InfeasibleTransmissionError(f"Satellite {j} is not visible at t={t:.3f}s")
    return task.effective_bits(cfg) / link.rate


def compute_time(task: Task, speed: float) -> float:
    """Computation time D_i / speed; redundant padding is not computed."""
    if speed <= 0:
        raise ValueError("Compute speed must be strictly positive")
    return task.size_mb / speed


def migration_time(task: Task, hops: int, cfg: ScenarioConfig) -> float:
    """ISL migration time of a task's result over the given hop count."""
    return hops * (cfg.result_size_ratio * task.size_mb) / cfg.isl_rate_mbps


def backhaul_time(task: Task, landing: int, t: float, cfg: ScenarioConfig) -> float:
    """Result download time from the landing satellite, rate frozen at t."""
    return task.result_bits(cfg) / link_at(landing, t, cfg).rate


def evaluate_decisions(decisions: Sequence[Decision], cfg: ScenarioConfig) -> EvaluationReport:
    """
    Evaluate a possibly partial decision list.

    Tasks that have no decision yet are simply absent from the timeline.
    """
    check_decisions(decisions, cfg)

    timeline: List[Optional[TaskTimeline]] = [None] * len(decisions)
    busy_until = [0.0] * cfg.num_satellites
    uplink = 0.0
    local_ranks = []

    for rank, decision in enumerate(decisions):
        task = decision_task(decision, rank, cfg)
        if decision.is_local:
            local_ranks.append(rank)
            continue

        j = task.target
        start = next_visible_time(j, uplink, cfg)
        if start is None:
            reason = f"satellite {j} not visible within {cfg.visibility_horizon_s}s of t={uplink:.3f}s"
            logger.debug(f"Infeasible schedule: {reason}")
            return infeasible_report([t for t in timeline if t is not None], reason, cfg.num_satellites)

        link = link_at(j, start, cfg)
        try:
            duration = upload_time(task, j, start, cfg)
        except InfeasibleTransmissionError as e:
            return infeasible_report([t for t in timeline if t is not None], str(e), cfg.num_satellites)
        upload_end = start + duration
        uplink = upload_end

        comp_start = max(busy_until[j], upload_end)
        comp_end = comp_start + compute_time(task, cfg.sat_speed_mbps(j))
        busy_until[j] = comp_end

        target = migration_target(j, comp_end, cfg)
        if target is None:
            reason = f"no visible satellite to return task {task.id} at t={comp_end:.3f}s"
            logger.debug(f"Infeasible schedule: {reason}")
            return infeasible_report([t for t in timeline if t is not None], reason, cfg.num_satellites)
        landing, hops = target
        migrate_end = comp_end if hops == 0 else comp_end + migration_time(task, hops, cfg)
        download_end = migrate_end + backhaul_time(task, landing, migrate_end, cfg)

        timeline[rank] = TaskTimeline(
            task_id=task.id,
            location=decision.location,
            redundancy=task.redundancy,
            size_mb=task.size_mb,
            upload_start=start,
            upload_end=upload_end,
            comp_start=comp_start,
            comp_end=comp_end,
            migrate_end=migrate_end,
            download_end=download_end,
            hops=hops,
            landing=landing,
            upload_seconds=duration,
            effective_bits=task.effective_bits(cfg),
            channel_gain=link.gain,
            ber=link.ber,
        )

    # Local tasks start once the last upload has ended, in schedule order
    local_clock = uplink
    for rank in local_ranks:
        task = decision_task(decisions[rank], rank, cfg)
        start = local_clock
        local_clock = start + compute_time(task, cfg.ue_compute_speed_mbps)
        timeline[rank] = TaskTimeline(
            task_id=task.id,
            location=decisions[rank].location,
            redundancy=0,
            size_mb=task.size_mb,
            upload_start=start,
            upload_end=start,
            comp_start=start,
            comp_end=local_clock,
            migrate_end=local_clock,
            download_end=local_clock,
        )

    return assemble_report(timeline, uplink, local_clock, busy_until, cfg)


def assemble_report(timeline: List[TaskTimeline], uplink_end: float, local_end: float,
                    busy_until: Sequence[float], cfg: ScenarioConfig) -> EvaluationReport:
    """Combine a complete timeline into the objective and constraint checks."""
    offload_end = max((t.download_end for t in timeline if not t.is_local), default=0.0)
    total_time = max(offload_end, local_end)

    used = energy(timeline, cfg)
    failure = reliability(timeline)
    record = privacy(timeline, cfg)
    summary = total_cost(total_time, used.total, failure, record.average, cfg)

    return EvaluationReport(
        total_time=total_time,
        energy=used.total,
        energy_comp=used.comp,
        energy_tran=used.tran,
        failure_prob=failure,
        privacy=record.average,
        cost=summary.cost,
        feasible_time=summary.feasible_time,
        feasible_reliability=summary.feasible_reliability,
        feasible_privacy=summary.feasible_privacy,
        timeline=list(timeline),
        privacy_record=record,
        uplink_end=uplink_end,
        satellite_busy_until=tuple(busy_until),
    )


def evaluate_schedule(schedule: Schedule, cfg: ScenarioConfig) -> EvaluationReport:
    """
    Evaluate a complete schedule.

    Args:
        schedule: permutation of all task ids with locations and redundancy flags
        cfg: scenario configuration

    Returns:
        EvaluationReport: objective terms, constraint flags and per-task timeline

    Raises:
        ScheduleError: if the schedule is not a valid permutation
    """
    schedule.validate(cfg)
    return evaluate_decisions(schedule.decisions, cfg)


def write_timeline_csv(report: EvaluationReport, path: Union[str, Path], cfg: ScenarioConfig,
                       seed: int) -> Path:
    """Dump one row per task with all timestamps, under the provenance header."""
    columns = [
        'task_id', 'location', 'redundancy', 'size_mb', 'upload_start', 'upload_end',
        'comp_start', 'comp_end', 'migrate_end', 'download_end', 'hops', 'landing',
    ]
    frame = pd.DataFrame([t.to_dict() for t in report.timeline], columns=columns)
    return write_csv(frame, path, cfg, seed)
