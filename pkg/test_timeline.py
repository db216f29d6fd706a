"""
Tests for the deterministic schedule evaluator.
"""

import math

import numpy as np
import pytest

from leo_offload.core.errors import InfeasibleTransmissionError, ScheduleError
from leo_offload.models.scenario import scenario_hash
from leo_offload.models.schedule import Decision, Schedule, Task, TaskTimeline
from leo_offload.services.geometry import link_at, migration_target
from leo_offload.services.timeline import (
    compute_time,
    evaluate_decisions,
    evaluate_schedule,
    upload_time,
    write_timeline_csv,
)
from leo_offload.utils.provenance import read_csv, read_header


def random_schedule(cfg, rng):
    order = rng.permutation(cfg.num_tasks)
    locations = rng.integers(0, cfg.num_satellites + 1, size=cfg.num_tasks)
    redundancy = rng.integers(0, 2, size=cfg.num_tasks)
    return Schedule.from_triples(zip(order, locations, redundancy))


def test_local_tasks_send_no_bits(tiny_cfg):
    task = Task(id=0, size_mb=400.0)
    assert task.effective_bits(tiny_cfg) == 0.0
    assert task.result_bits(tiny_cfg) == pytest.approx(0.1 * 3.2e9, rel=1e-12)


def test_upload_arithmetic(tiny_cfg):
    plain = Task(id=0, size_mb=400.0, decision_flag=1, target=1)
    padded = Task(id=0, size_mb=400.0, decision_flag=1, target=1, redundancy=1)
    assert plain.effective_bits(tiny_cfg) == 3.2e9
    assert compute_time(plain, 40.0) == 10.0
    assert compute_time(padded, 40.0) == compute_time(plain, 40.0)
    assert padded.effective_bits(tiny_cfg) == pytest.approx(1.1 * 3.2e9, rel=1e-12)
    assert upload_time(padded, 1, 0.0, tiny_cfg) == pytest.approx(1.1 * upload_time(plain, 1, 0.0, tiny_cfg), rel=1e-12)
    assert upload_time(plain, 1, 0.0, tiny_cfg) == 3.2e9 / link_at(1, 0.0, tiny_cfg).rate


def test_upload_to_invisible_satellite_raises(table2_cfg):
    task = Task(id=0, size_mb=400.0, decision_flag=1, target=24)
    with pytest.raises(InfeasibleTransmissionError):
        upload_time(task, 24, 0.0, table2_cfg)


def test_compute_time():
    task = Task(id=0, size_mb=45.0)
    assert compute_time(task, 45.0) == 1.0
    assert compute_time(Task(id=1, size_mb=400.0), 30.0) == pytest.approx(13.333333333333334)
    assert compute_time(Task(id=1, size_mb=400.0), 45.0) == pytest.approx(8.88888888888889)
    with pytest.raises(ValueError):
        compute_time(task, 0.0)


def test_task_requires_target_iff_offloaded():
    with pytest.raises(ScheduleError):
        Task(id=0, size_mb=1.0, decision_flag=1)
    with pytest.raises(ScheduleError):
        Task(id=0, size_mb=1.0, decision_flag=0, target=2)


def test_all_local_schedule(table2_cfg):
    cfg = table2_cfg
    report = evaluate_schedule(Schedule.all_local(cfg.num_tasks), cfg)
    assert report.total_time == pytest.approx(sum(cfg.sizes_mb) / 30.0)
    assert report.failure_prob == 0.0
    assert report.privacy == 2.0
    assert report.energy_tran == 0.0
    assert report.energy == pytest.approx(cfg.compute_power_w * report.total_time)
    assert report.satellite_busy_until == tuple([0.0] * cfg.num_satellites)
    assert all(t.hops == 0 for t in report.timeline)
    # back to back from t = 0
    assert report.timeline[0].comp_start == 0.0
    for a, b in zip(report.timeline[:-1], report.timeline[1:]):
        assert b.comp_start == a.comp_end


def test_single_offloaded_task_by_hand(single_task_cfg):
    cfg = single_task_cfg
    report = evaluate_schedule(Schedule.from_triples([(0, 2, 0)]), cfg)
    t = report.timeline[0]

    rate = link_at(1, 0.0, cfg).rate
    upload = 3.2e9 / rate
    comp_end = upload + 400.0 / 45.0
    landing, hops = migration_target(1, comp_end, cfg)
    backhaul = 0.1 * 400.0 * 8e6 / link_at(landing, comp_end, cfg).rate

    assert (landing, hops) == (1, 0)
    assert t.upload_start == 0.0
    assert t.upload_end == pytest.approx(upload, rel=1e-12)
    assert t.comp_start == t.upload_end
    assert t.comp_end == pytest.approx(comp_end, rel=1e-12)
    assert t.migrate_end == t.comp_end
    assert t.download_end == pytest.approx(comp_end + backhaul, rel=1e-12)
    assert report.total_time == t.download_end
    assert report.energy == pytest.approx(5.0 * upload, rel=1e-12)
    assert report.cost == pytest.approx(report.total_time + report.energy, rel=1e-12)


def test_fcfs_on_shared_satellite(tiny_cfg):
    """The second task waits for the first to finish computing."""
    report = evaluate_schedule(Schedule.from_triples([(0, 2, 0), (1, 2, 0), (2, 0, 0)]), tiny_cfg)
    first, second, third = report.timeline
    assert second.upload_start == first.upload_end
    assert second.upload_end < first.comp_end
    assert second.comp_start == first.comp_end
    assert second.comp_end == pytest.approx(first.comp_end + 800.0 / 45.0, rel=1e-12)
    # the local task starts once the uplink is free
    assert third.comp_start == second.upload_end
    assert report.uplink_end == second.upload_end
    assert report.satellite_busy_until[1] == second.comp_end


def test_redundancy_lengthens_uploads_only(tiny_cfg):
    plain = evaluate_schedule(Schedule.from_triples([(0, 2, 0), (1, 3, 0), (2, 1, 0)]), tiny_cfg)
    padded = evaluate_schedule(Schedule.from_triples([(0, 2, 1), (1, 3, 1), (2, 1, 1)]), tiny_cfg)
    assert padded.energy_tran > plain.energy_tran
    for a, b in zip(plain.timeline, padded.timeline):
        assert b.upload_seconds > a.upload_seconds
        assert b.comp_end - b.comp_start == pytest.approx(a.comp_end - a.comp_start, rel=1e-12)


def test_invariants_over_random_schedules(table2_cfg):
    rng = np.random.default_rng(2024)
    checked = 0
    for _ in range(1000):
        n = int(rng.integers(1, 31))
        m = int(rng.integers(1, 26))
        anchor = 360.0 - (m - 1) * table2_cfg.sat_spacing_deg / 2.0
        cfg = table2_cfg.with_overrides(num_tasks=n, num_satellites=m, initial_anchor_angle_deg=anchor,
                                        rng_seed=int(rng.integers(0, 1000)))
        report = evaluate_schedule(random_schedule(cfg, rng), cfg)
        timeline = report.timeline

        # ordering holds on complete timelines and on the prefix an infeasible report keeps
        for t in timeline:
            assert 0.0 <= t.upload_start <= t.upload_end <= t.comp_start <= t.comp_end
            assert t.comp_end <= t.migrate_end <= t.download_end

        uploads = [t for t in timeline if not t.is_local]
        for a, b in zip(uploads[:-1], uploads[1:]):
            assert b.upload_start >= a.upload_end
        for j in range(m):
            served = [t for t in uploads if t.location == j + 1]
            for a, b in zip(served[:-1], served[1:]):
                assert b.comp_start >= a.comp_end

        if not report.transmission_feasible:
            assert report.infeasible_reason
            assert report.cost == math.inf
            assert report.violations == 3
            assert len(timeline) < n
            continue
        checked += 1

        assert len(timeline) == n
        locals_ = [t for t in timeline if t.is_local]
        if locals_:
            assert locals_[0].comp_start == report.uplink_end
        assert report.total_time == max(t.download_end for t in timeline)
        assert report.energy >= 0.0
        assert 0.0 <= report.failure_prob <= 1.0
        assert 0.0 <= report.privacy <= 1.0 + cfg.privacy_weight
    assert checked > 300


def test_evaluation_is_deterministic(table2_cfg):
    rng = np.random.default_rng(3)
    schedule = random_schedule(table2_cfg, rng)
    assert evaluate_schedule(schedule, table2_cfg).to_dict() == evaluate_schedule(schedule, table2_cfg).to_dict()


def test_invalid_schedules_raise(tiny_cfg):
    with pytest.raises(ScheduleError):
        evaluate_schedule(Schedule.from_triples([(0, 0, 0), (0, 1, 0), (2, 0, 0)]), tiny_cfg)
    with pytest.raises(ScheduleError):
        evaluate_schedule(Schedule.from_triples([(0, 0, 0), (1, 4, 0), (2, 0, 0)]), tiny_cfg)
    with pytest.raises(ScheduleError):
        evaluate_schedule(Schedule.from_triples([(0, 0, 0), (1, 0, 2), (2, 0, 0)]), tiny_cfg)
    with pytest.raises(ScheduleError):
        evaluate_schedule(Schedule.from_triples([(0, 0, 0), (1, 0, 0)]), tiny_cfg)


def test_partial_decisions(tiny_cfg):
    report = evaluate_decisions([Decision(2, 1, 1)], tiny_cfg)
    assert len(report.timeline) == 1
    assert report.timeline[0].task_id == 2


def test_unreachable_satellite_gives_infeasible_report(table2_cfg):
    cfg = table2_cfg.with_overrides(num_tasks=2, num_satellites=2, initial_anchor_angle_deg=180.0)
    report = evaluate_schedule(Schedule.from_triples([(0, 1, 0), (1, 0, 0)]), cfg)
    assert report.cost == math.inf
    assert not report.transmission_feasible
    assert not report.feasible
    assert report.violations == 3


def test_timeline_csv(tiny_cfg, tmp_path):
    report = evaluate_schedule(Schedule.from_triples([(0, 2, 0), (1, 2, 0), (2, 0, 0)]), tiny_cfg)
    path = write_timeline_csv(report, tmp_path / "timeline.csv", tiny_cfg, 7)
    header = read_header(path)
    assert header["scenario_sha256"] == scenario_hash(tiny_cfg)
    assert header["seed"] == "7"
    frame = read_csv(path)
    assert len(frame) == 3
    assert list(frame["task_id"]) == [0, 1, 2]
    assert frame.loc[1, "comp_start"] == pytest.approx(frame.loc[0, "comp_end"])


def test_timeline_rows_rebuild_from_dicts(tiny_cfg):
    report = evaluate_schedule(Schedule.from_triples([(2, 1, 1), (0, 3, 0), (1, 0, 0)]), tiny_cfg)
    rows = report.to_dict()["timeline"]
    assert [TaskTimeline.from_dict(row) for row in rows] == report.timeline
    assert TaskTimeline.from_dict(rows[2]).is_local
