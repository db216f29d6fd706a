"""
Energy, reliability, privacy and total-cost computation over an evaluated timeline.
"""

import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple

from ..models.scenario import ScenarioConfig
from ..models.schedule import PrivacyRecord, TaskTimeline


@dataclass(frozen=True)
class EnergyBreakdown:
    """UE energy in joules."""
    comp: float
    tran: float

    @property
    def total(self) -> float:
        return self.comp + self.tran


@dataclass(frozen=True)
class CostSummary:
    """Objective value and the three constraint checks."""
    cost: float
    feasible_time: bool
    feasible_reliability: bool
    feasible_privacy: bool


def energy(timeline: Sequence[TaskTimeline], cfg: ScenarioConfig) -> EnergyBreakdown:
    """
    UE energy: kappa f^3 times local compute seconds plus P_tran times upload seconds.

    Upload seconds include redundant padding.
    """
    local_seconds = sum(t.size_mb / cfg.ue_compute_speed_mbps for t in timeline if t.is_local)
    upload_seconds = sum(t.upload_seconds for t in timeline if not t.is_local)
    return EnergyBreakdown(
        comp=cfg.compute_power_w * local_seconds,
        tran=cfg.ue_tx_power_w * upload_seconds,
    )


def failure_probability(transfers: Iterable[Tuple[float, float]]) -> float:
    """
    Offloading failure probability from (effective bits, BER) pairs.

    Evaluated in the log domain: ln r_success = sum(bits * ln(1 - b)).
    """
    log_success = 0.0
    for bits, b in transfers:
        if bits > 0.0 and b > 0.0:
            log_success += bits * math.log1p(-b)
    failure = -math.expm1(log_success)
    return min(1.0, max(0.0, failure))


def reliability(timeline: Sequence[TaskTimeline]) -> float:
    """Failure probability of a timeline; local tasks contribute a factor of 1."""
    return failure_probability(
        (t.effective_bits, t.ber) for t in timeline if not t.is_local and t.ber is not None
    )


def privacy(timeline: Sequence[TaskTimeline], cfg: ScenarioConfig) -> PrivacyRecord:
    """Usage-pattern and location privacy indicators per decision, plus the weighted average."""
    omega = cfg.channel_threshold_linear
    usage, location, per_decision = [], [], []
    for t in timeline:
        if t.is_local:
            p_u, p_l = 1, 1
        else:
            good = t.channel_gain >= omega
            p_u = int(t.redundancy == 1 and good)
            p_l = int(not good)
        usage.append(p_u)
        location.append(p_l)
        per_decision.append(p_u + cfg.privacy_weight * p_l)

    average = sum(per_decision) / len(per_decision) if per_decision else 0.0
    return PrivacyRecord(
        usage=tuple(usage),
        location=tuple(location),
        per_decision=tuple(per_decision),
        average=average,
    )


def total_cost(total_time: float, energy_j: float, failure_prob: float, privacy_level: float,
               cfg: ScenarioConfig) -> CostSummary:
    """C = T_total + mu * E with the time, reliability and privacy constraints."""
    return CostSummary(
        cost=total_time + cfg.energy_weight * energy_j,
        feasible_time=total_time < cfg.time_threshold_s,
        feasible_reliability=failure_prob < cfg.failure_threshold,
        feasible_privacy=privacy_level >= cfg.privacy_threshold,
    )
