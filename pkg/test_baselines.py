"""
Tests for the random, uniform and oracle policies.
"""

import json

import pytest

from leo_offload.core.errors import OracleCapExceeded
from leo_offload.models.scenario import load_scenario
from leo_offload.models.schedule import Schedule
from leo_offload.services.baselines import (
    brute_force_oracle,
    candidate_count,
    enumerate_schedules,
    export_oracle_fixture,
    random_policy,
    uniform_policy,
)
from leo_offload.services.timeline import evaluate_schedule


def test_candidate_counts(tiny_cfg):
    assert candidate_count(tiny_cfg.with_overrides(num_tasks=1, task_sizes=[400.0], num_satellites=1)) == 4
    assert candidate_count(tiny_cfg.with_overrides(num_tasks=2, task_sizes=[400.0, 800.0], num_satellites=1)) == 32
    assert candidate_count(tiny_cfg) == 3072


def test_enumeration_is_complete_and_distinct(tiny_cfg):
    cfg = tiny_cfg.with_overrides(num_tasks=2, task_sizes=[400.0, 800.0], num_satellites=1)
    keys = [s.key for s in enumerate_schedules(cfg)]
    assert len(keys) == 32
    assert len(set(keys)) == 32


def test_enumeration_runs_task_order_major(tiny_cfg):
    cfg = tiny_cfg.with_overrides(num_satellites=1)
    keys = [s.key for s in enumerate_schedules(cfg)]
    assert len(keys) == 384
    assert keys[0] == ((0, 0, 0), (1, 0, 0), (2, 0, 0))
    assert keys[1] == ((0, 0, 0), (1, 0, 0), (2, 0, 1))
    assert keys[4] == ((0, 0, 0), (1, 0, 1), (2, 0, 0))
    assert keys[16] == ((0, 0, 1), (1, 0, 0), (2, 0, 0))
    assert keys[63] == ((0, 1, 1), (1, 1, 1), (2, 1, 1))
    assert keys[64] == ((0, 0, 0), (2, 0, 0), (1, 0, 0))
    assert keys[-1] == ((2, 1, 1), (1, 1, 1), (0, 1, 1))
    # each block of 64 keeps one task order
    for block in range(6):
        orders = {tuple(d[0] for d in k) for k in keys[64 * block:64 * (block + 1)]}
        assert len(orders) == 1
    assert keys != sorted(keys)


def test_oracle_cap(tiny_cfg):
    with pytest.raises(OracleCapExceeded) as excinfo:
        brute_force_oracle(tiny_cfg, cap=1000)
    assert excinfo.value.count == 3072
    assert excinfo.value.cap == 1000


def test_oracle_is_optimal_with_lexicographic_ties(tiny_cfg):
    cfg = tiny_cfg.with_overrides(num_tasks=2, task_sizes=[400.0, 800.0], num_satellites=2)
    result = brute_force_oracle(cfg)
    assert result.count == candidate_count(cfg)
    best = result.best
    assert best is not None
    feasible = [(evaluate_schedule(s, cfg), s) for s in enumerate_schedules(cfg)]
    feasible = [(r.cost, s.key) for r, s in feasible if r.feasible]
    assert (best.report.cost, best.schedule.key) == min(feasible)


def test_oracle_tie_break_on_local_only():
    # nothing is ever visible, so only the all-local schedules are transmittable
    cfg = load_scenario("num_tasks: 1\nnum_satellites: 1\ninitial_anchor_angle_deg: 180.0\n")
    result = brute_force_oracle(cfg)
    assert result.best.schedule == Schedule.from_triples([(0, 0, 0)])


def test_oracle_dominates_other_policies(tiny_cfg):
    oracle = brute_force_oracle(tiny_cfg).result.report
    assert oracle.feasible
    for report in (uniform_policy(tiny_cfg).report, random_policy(tiny_cfg, 200, seed=1).report,
                   evaluate_schedule(Schedule.all_local(3), tiny_cfg)):
        assert oracle.cost <= report.penalized_cost(100.0)


def test_oracle_without_feasible_schedule(tiny_cfg):
    cfg = tiny_cfg.with_overrides(time_threshold_s=1.0)
    result = brute_force_oracle(cfg)
    assert result.best is None
    assert not result.result.feasible_found
    assert result.result is result.unconstrained


def test_oracle_fixture_export(tiny_cfg, tmp_path):
    cfg = tiny_cfg.with_overrides(num_tasks=2, task_sizes=[400.0, 800.0])
    result = brute_force_oracle(cfg)
    path = export_oracle_fixture(result, cfg, tmp_path / "oracle.json")
    data = json.loads(path.read_text())
    assert data["count"] == result.count
    assert data["best"]["C"] == result.best.report.cost
    assert Schedule.from_triples(data["best"]["schedule"]) == result.best.schedule


def test_random_with_one_draw(tiny_cfg):
    result = random_policy(tiny_cfg, 1, seed=4)
    assert result.report.to_dict() == evaluate_schedule(result.schedule, tiny_cfg).to_dict()


def test_random_pools_are_nested(tiny_cfg):
    """Growing K never gives a worse (feasible first, then cheaper) result."""
    ranks = []
    for k in (1, 2, 5, 10, 50, 200):
        result = random_policy(tiny_cfg, k, seed=8)
        ranks.append((not result.feasible_found, result.report.cost))
    assert ranks == sorted(ranks, reverse=True)


def test_random_is_reproducible(tiny_cfg):
    assert random_policy(tiny_cfg, 20, seed=2).schedule == random_policy(tiny_cfg, 20, seed=2).schedule
    with pytest.raises(ValueError):
        random_policy(tiny_cfg, 0)


def test_uniform_round_robin(tiny_cfg):
    result = uniform_policy(tiny_cfg)
    # satellites at 2, 0 and -2 degrees, taken counterclockwise
    assert result.schedule == Schedule.from_triples([(0, 3, 0), (1, 2, 0), (2, 1, 0)])
    assert uniform_policy(tiny_cfg).report.to_dict() == result.report.to_dict()


def test_uniform_wraps_around_visible_satellites(table2_cfg):
    cfg = table2_cfg.with_overrides(num_satellites=2, initial_anchor_angle_deg=0.0)
    result = uniform_policy(cfg)
    locations = [d.location for d in result.schedule.decisions]
    assert locations == [2, 1] * 7 + [2]


def test_uniform_cost_ignores_reliability_threshold(tiny_cfg):
    costs = {
        uniform_policy(tiny_cfg.with_overrides(failure_threshold=1.0 - pct / 100.0)).report.cost
        for pct in (94, 95, 96, 97, 98, 99)
    }
    assert len(costs) == 1


def test_uniform_falls_back_to_local(tiny_cfg):
    cfg = tiny_cfg.with_overrides(initial_anchor_angle_deg=180.0)
    result = uniform_policy(cfg)
    assert result.schedule == Schedule.all_local(3)
    assert result.report.privacy == 2.0
