"""
Non-learning comparison policies and the exhaustive oracle.
"""

import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterator, Optional, Union

import numpy as np
from loguru import logger

from ..core.config import settings
from ..core.errors import OracleCapExceeded
from ..models.scenario import ScenarioConfig, scenario_hash
from ..models.schedule import Decision, EvaluationReport, Schedule
from .event_sim import simulate_schedule
from .geometry import TWO_PI, Constellation
from .timeline import evaluate_schedule


@dataclass
class PolicyResult:
    """A policy's chosen schedule and its evaluation."""
    name: str
    schedule: Schedule
    report: EvaluationReport
    feasible_found: bool = True

    def to_dict(self) -> Dict[str, Any]:
        return {
            "policy": self.name,
            "feasible_found": self.feasible_found,
            "schedule": self.schedule.to_dict()["decisions"],
            **self.report.summary(),
        }


@dataclass
class OracleResult:
    """Best feasible schedule (if any), the unconstrained best and the enumeration count."""
    best: Optional[PolicyResult]
    unconstrained: PolicyResult
    count: int

    @property
    def result(self) -> PolicyResult:
        """The feasible optimum, or the unconstrained optimum when nothing is feasible."""
        return self.best if self.best is not None else self.unconstrained


def random_policy(cfg: ScenarioConfig, pool_size: int = 1000, seed: int = 0) -> PolicyResult:
    """
    Best of K uniformly drawn schedules.

    Draws are sequential from one seeded generator, so the pool for K is a
    prefix of the pool for any larger K. Returns the cheapest feasible
    schedule, else the cheapest overall with ``feasible_found`` false.
    """
    if pool_size < 1:
        raise ValueError("pool_size must be at least 1")
    rng = np.random.default_rng(seed)
    n, m = cfg.num_tasks, cfg.num_satellites

    best_feasible: Optional[PolicyResult] = None
    best_any: Optional[PolicyResult] = None
    for _ in range(pool_size):
        order = rng.permutation(n)
        locations = rng.integers(0, m + 1, size=n)
        redundancy = rng.integers(0, 2, size=n)
        schedule = Schedule.from_triples(zip(order, locations, redundancy))
        report = evaluate_schedule(schedule, cfg)
        candidate = PolicyResult("random", schedule, report)
        if best_any is None or report.cost < best_any.report.cost:
            best_any = candidate
        if report.feasible and (best_feasible is None or report.cost < best_feasible.report.cost):
            best_feasible = candidate

    if best_feasible is not None:
        return best_feasible
    best_any.feasible_found = False
    return best_any


def uniform_policy(cfg: ScenarioConfig) -> PolicyResult:
    """
    Round-robin over the satellites visible at t = 0, tasks in id order, no redundancy.

    Visible satellites are taken in counterclockwise order (descending signed
    geocentric angle). With nothing visible every task runs locally.
    """
    constellation = Constellation(cfg)
    visible = constellation.visible(0.0)
    if not visible:
        logger.warning("⚠️ No satellite visible at t=0; uniform policy falls back to local execution")
        schedule = Schedule.all_local(cfg.num_tasks)
        return PolicyResult("uniform", schedule, evaluate_schedule(schedule, cfg))

    def signed(j: int) -> float:
        gamma = constellation.angle(j, 0.0)
        return gamma - TWO_PI if gamma > math.pi else gamma

    ordered = sorted(visible, key=lambda j: (-signed(j), j))
    schedule = Schedule(tuple(
        Decision(i, ordered[i % len(ordered)] + 1, 0) for i in range(cfg.num_tasks)
    ))
    return PolicyResult("uniform", schedule, evaluate_schedule(schedule, cfg))


def candidate_count(cfg: ScenarioConfig) -> int:
    """((M + 1) * 2)^N * N! ordered decision sequences."""
    return ((cfg.num_satellites + 1) * 2) ** cfg.num_tasks * math.factorial(cfg.num_tasks)


def enumerate_schedules(cfg: ScenarioConfig) -> Iterator[Schedule]:
    """
    Every ordered decision sequence, task order major.

    For each task permutation (in itertools order) the (location, redundancy)
    picks run through their Cartesian product, last task fastest.
    """
    n = cfg.num_tasks
    choices = list(itertools.product(range(cfg.num_satellites + 1), range(2)))
    for order in itertools.permutations(range(n)):
        for picks in itertools.product(choices, repeat=n):
            yield Schedule(tuple(Decision(t, loc, red) for t, (loc, red) in zip(order, picks)))


def brute_force_oracle(cfg: ScenarioConfig, cap: Optional[int] = None) -> OracleResult:
    """
    Exhaustive minimum-cost search.

    Ties are broken by the lexicographically smallest decision sequence.

    Raises:
        OracleCapExceeded: if the candidate count exceeds the cap
    """
    cap = settings.oracle_cap if cap is None else cap
    count = candidate_count(cfg)
    if count > cap:
        raise OracleCapExceeded(count, cap)

    logger.info(f"🔎 Enumerating {count} schedules (N={cfg.num_tasks}, M={cfg.num_satellites})")
    best_key = None
    best_any_key = None
    best = best_any = None
    enumerated = 0
    for schedule in enumerate_schedules(cfg):
        enumerated += 1
        report = evaluate_schedule(schedule, cfg)
        key = (report.cost, schedule.key)
        if best_any_key is None or key < best_any_key:
            best_any_key, best_any = key, (schedule, report)
        if report.feasible and (best_key is None or key < best_key):
            best_key, best = key, (schedule, report)

    unconstrained = PolicyResult("oracle", *best_any, feasible_found=best is not None)
    feasible = PolicyResult("oracle", *best) if best is not None else None
    if feasible is None:
        logger.warning("⚠️ Oracle found no feasible schedule; returning the unconstrained optimum")
    return OracleResult(best=feasible, unconstrained=unconstrained, count=enumerated)


def cross_check(cfg: ScenarioConfig, cap: Optional[int] = None) -> int:
    """
    Compare the timeline evaluator with the event-driven enumerator on every schedule.

    Returns the number of schedules whose timestamps or costs differ.
    """
    cap = settings.oracle_cap if cap is None else cap
    count = candidate_count(cfg)
    if count > cap:
        raise OracleCapExceeded(count, cap)
    mismatches = 0
    for schedule in enumerate_schedules(cfg):
        if not reports_match(evaluate_schedule(schedule, cfg), simulate_schedule(schedule, cfg)):
            mismatches += 1
            logger.warning(f"⚠️ Evaluator mismatch on schedule {schedule.key}")
    return mismatches


def reports_match(a: EvaluationReport, b: EvaluationReport) -> bool:
    """Bit-exact agreement of costs and, for transmittable schedules, every timestamp."""
    if a.transmission_feasible != b.transmission_feasible:
        return False
    if not a.transmission_feasible:
        return True
    if (a.total_time, a.energy, a.failure_prob, a.privacy, a.cost) != (b.total_time, b.energy, b.failure_prob, b.privacy, b.cost):
        return False
    return [t.to_dict() for t in a.timeline] == [t.to_dict() for t in b.timeline]


def export_oracle_fixture(result: OracleResult, cfg: ScenarioConfig, path: Union[str, Path]) -> Path:
    """Write the oracle optimum as a JSON fixture."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "scenario_hash": scenario_hash(cfg),
        "num_tasks": cfg.num_tasks,
        "num_satellites": cfg.num_satellites,
        "count": result.count,
        "best": result.best.to_dict() if result.best else None,
        "unconstrained": result.unconstrained.to_dict(),
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")
    logger.info(f"💾 Oracle fixture written to {path}")
    return path
