"""
Pieces shared by the PPO and DQN trainers: learning-rate schedule,
greedy evaluation episodes and the training-log schema.
"""

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Protocol, Sequence, Tuple

import numpy as np
import pandas as pd

from ..models.scenario import ScenarioConfig
from ..models.schedule import EvaluationReport, Schedule
from .environment import ActionMask, OffloadingEnv

LOG_COLUMNS = [
    "timestep", "mean_return", "mean_cost", "T_total", "E", "r_failure",
    "P_total", "feasible_fraction", "lr",
]


def learning_rate(timestep: int, total_timesteps: int, lr_initial: float, lr_final: float,
                  mode: str = "linear") -> float:
    """
    Learning rate at a timestep.

    ``linear`` interpolates from lr_initial at 0 to lr_final at total_timesteps
    and is exact at both endpoints; ``fixed`` always returns lr_initial.
    """
    if mode == "fixed":
        return lr_initial
    if mode != "linear":
        raise ValueError(f"Unknown learning-rate mode: {mode}")
    frac = min(1.0, max(0.0, timestep / total_timesteps))
    return (1.0 - frac) * lr_initial + frac * lr_final


class Agent(Protocol):
    max_tasks: int
    max_satellites: int

    def act(self, observation: np.ndarray, mask: ActionMask, rng: Optional[np.random.Generator] = None,
            greedy: bool = True) -> Tuple[int, int, int]:
        ...


@dataclass
class EpisodeResult:
    """Outcome of one greedy episode."""
    seed: int
    schedule: Schedule
    report: EvaluationReport
    episode_return: float
    cost: float  # finite cost as seen by the environment


def run_episode(agent: Agent, env: OffloadingEnv, seed: int) -> EpisodeResult:
    observation, info = env.reset(seed=seed)
    total = 0.0
    while True:
        action = agent.act(observation, info["action_mask"], greedy=True)
        observation, reward, terminated, truncated, info = env.step(action)
        total += reward
        if terminated or truncated:
            break
    return EpisodeResult(seed=seed, schedule=info["schedule"], report=info["report"],
                         episode_return=total, cost=info["cost"])


def evaluate_agent(agent: Agent, cfg: ScenarioConfig, seeds: Sequence[int],
                   penalty: float = 100.0) -> List[EpisodeResult]:
    """Run one greedy episode per seed; a seed re-draws generated task sizes."""
    env = OffloadingEnv(cfg, max_tasks=agent.max_tasks, max_satellites=agent.max_satellites, penalty=penalty)
    return [run_episode(agent, env, int(seed)) for seed in seeds]


def log_row(timestep: int, episodes: Sequence[EpisodeResult], lr: float) -> Dict[str, float]:
    """Aggregate greedy episodes into one training-log row."""
    reports = [e.report for e in episodes]

    def mean(values):
        values = list(values)
        return float(np.mean(values)) if values else math.nan

    return {
        "timestep": int(timestep),
        "mean_return": mean(e.episode_return for e in episodes),
        "mean_cost": mean(e.cost for e in episodes),
        "T_total": mean(r.total_time for r in reports),
        "E": mean(r.energy for r in reports),
        "r_failure": mean(r.failure_prob for r in reports),
        "P_total": mean(r.privacy for r in reports),
        "feasible_fraction": mean(float(r.feasible) for r in reports),
        "lr": lr,
    }


def log_frame(rows: Sequence[Dict[str, float]]) -> pd.DataFrame:
    return pd.DataFrame(list(rows), columns=LOG_COLUMNS)


@dataclass
class TrainingResult:
    """Trained agent plus its log rows."""
    agent: Agent
    log: List[Dict[str, float]]

    def frame(self) -> pd.DataFrame:
        return log_frame(self.log)
