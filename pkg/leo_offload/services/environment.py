"""
Sequential decision environment over the timeline simulator.

Each step assigns one unassigned task to a location (0 = local, j = satellite
j-1) with a redundancy flag. The reward is the reward constant minus the
marginal cost of the growing partial schedule, so an episode's return
telescopes to N * psi - C - penalties.
"""

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import gymnasium as gym
import numpy as np
from gymnasium import spaces
from loguru import logger

from ..core.errors import MaskedActionError, ScenarioError
from ..models.scenario import ScenarioConfig
from ..models.schedule import Decision, EvaluationReport, Schedule
from .geometry import Constellation
from .timeline import evaluate_decisions

UNASSIGNED = -1.0


@dataclass
class ActionMask:
    """Per-head boolean masks of the multi-discrete action space."""
    task: np.ndarray
    location: np.ndarray
    redundancy: np.ndarray

    def heads(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.task, self.location, self.redundancy

    def allows(self, action: Sequence[int]) -> bool:
        x_num, loc, red = (int(a) for a in action)
        for mask, index in zip(self.heads(), (x_num, loc, red)):
            if not 0 <= index < len(mask) or not mask[index]:
                return False
        return True

    def flat(self) -> np.ndarray:
        """Mask over the flattened index ((x_num * (M+1)) + loc) * 2 + red."""
        joint = self.task[:, None, None] & self.location[None, :, None] & self.redundancy[None, None, :]
        return joint.reshape(-1)


@dataclass
class EnvState:
    """Decoded environment state; ``observation()`` gives the policy input."""
    task_status: np.ndarray
    task_sizes: np.ndarray
    clock: float
    satellites: np.ndarray  # (M_max, 3): sin, cos, normalized backlog
    step: int

    def observation(self) -> np.ndarray:
        return np.concatenate([
            self.task_status,
            self.task_sizes,
            np.array([self.clock]),
            self.satellites.reshape(-1),
        ]).astype(np.float64)


def observation_size(max_tasks: int, max_satellites: int) -> int:
    return 2 * max_tasks + 1 + 3 * max_satellites


def state_hash(observation: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(observation, dtype=np.float64).tobytes()).hexdigest()


class OffloadingEnv(gym.Env):
    """
    Gymnasium environment for ordered task offloading.

    Args:
        cfg: scenario configuration
        max_tasks: padded task dimension N_max (defaults to N)
        max_satellites: padded satellite dimension M_max (defaults to M)
        penalty: terminal penalty per violated constraint
        infeasible_cost: finite cost used for infeasible partial schedules (defaults to 10 * T_hat)
        trajectory_log: optional JSONL file receiving one record per step
    """

    metadata = {"render_modes": []}

    def __init__(self, cfg: ScenarioConfig, max_tasks: Optional[int] = None,
                 max_satellites: Optional[int] = None, penalty: float = 100.0,
                 infeasible_cost: Optional[float] = None,
                 trajectory_log: Optional[Union[str, Path]] = None):
        super().__init__()
        self.max_tasks = int(max_tasks or cfg.num_tasks)
        self.max_satellites = int(max_satellites or cfg.num_satellites)
        self.penalty = float(penalty)
        self._infeasible_cost = infeasible_cost
        self.trajectory_log = Path(trajectory_log) if trajectory_log else None

        self.action_space = spaces.MultiDiscrete([self.max_tasks, self.max_satellites + 1, 2])
        self.observation_space = spaces.Box(
            low=-np.inf, high=np.inf,
            shape=(observation_size(self.max_tasks, self.max_satellites),),
            dtype=np.float64,
        )

        self.base_cfg = cfg
        self._set_scenario(cfg)
        self.decisions: List[Decision] = []
        self.report: Optional[EvaluationReport] = None
        self._partial_cost = 0.0
        self._episode = 0

    # ------------------------------------------------------------------
    # Gymnasium API
    # ------------------------------------------------------------------
    def reset(self, *, seed: Optional[int] = None,
              options: Optional[Dict[str, Any]] = None) -> Tuple[np.ndarray, Dict[str, Any]]:
        """
        Start a new episode at t = 0 with every task unassigned.

        ``options={"scenario": cfg}`` swaps in another scenario that fits the
        padded dimensions. A seed re-draws generated task sizes.
        """
        super().reset(seed=seed)
        if options and options.get("scenario") is not None:
            self.base_cfg = options["scenario"]
        cfg = self.base_cfg if seed is None else self.base_cfg.reseeded(seed)
        self._set_scenario(cfg)

        self.decisions = []
        self.report = None
        self._partial_cost = 0.0
        self._episode += 1
        return self.state().observation(), {"action_mask": self.action_mask()}

    def step(self, action: Sequence[int]) -> Tuple[np.ndarray, float, bool, bool, Dict[str, Any]]:
        """
        Append one decision and return the marginal-cost reward.

        Raises:
            MaskedActionError: if the action is excluded by the current mask
        """
        action = tuple(int(a) for a in np.asarray(action).reshape(-1))
        if len(action) != 3 or not self.action_mask().allows(action):
            raise MaskedActionError(f"Action {action} is masked at step {len(self.decisions)}")

        x_num, location, redundancy = action
        self.decisions.append(Decision(x_num, location, redundancy))
        self.report = evaluate_decisions(self.decisions, self.cfg)

        cost = self.partial_cost(self.report)
        reward = self.cfg.reward_constant - (cost - self._partial_cost)
        self._partial_cost = cost

        terminated = len(self.decisions) == self.cfg.num_tasks
        info: Dict[str, Any] = {"cost": cost}
        if terminated:
            reward -= self.penalty * self.report.violations
            info["report"] = self.report
            info["schedule"] = self.schedule
            if not self.report.transmission_feasible:
                logger.debug(f"Episode {self._episode} ended infeasible: {self.report.infeasible_reason}")

        observation = self.state().observation()
        info["action_mask"] = self.action_mask()
        self._log_step(observation, action, reward)
        return observation, float(reward), terminated, False, info

    # ------------------------------------------------------------------
    # State and masks
    # ------------------------------------------------------------------
    def action_mask(self) -> ActionMask:
        task = np.zeros(self.max_tasks, dtype=bool)
        task[:self.cfg.num_tasks] = True
        for d in self.decisions:
            task[d.task_id] = False
        location = np.zeros(self.max_satellites + 1, dtype=bool)
        location[:self.cfg.num_satellites + 1] = True
        return ActionMask(task=task, location=location, redundancy=np.ones(2, dtype=bool))

    def state(self) -> EnvState:
        cfg = self.cfg
        status = np.zeros(self.max_tasks)
        status[:cfg.num_tasks] = UNASSIGNED
        scale = 2 * self.max_satellites + 1
        for d in self.decisions:
            status[d.task_id] = (d.location * 2 + d.redundancy) / scale

        sizes = np.zeros(self.max_tasks)
        sizes[:cfg.num_tasks] = np.asarray(cfg.sizes_mb) / max(cfg.sizes_mb)

        report = self.report
        clock = report.uplink_end if report is not None and report.transmission_feasible else 0.0
        busy = report.satellite_busy_until if report is not None else ()

        satellites = np.zeros((self.max_satellites, 3))
        for sat in Constellation(cfg).states(clock, busy or None):
            backlog = max(0.0, sat.busy_until - clock)
            satellites[sat.index] = (math.sin(sat.angle), math.cos(sat.angle), backlog / cfg.time_threshold_s)

        return EnvState(
            task_status=status,
            task_sizes=sizes,
            clock=clock / cfg.time_threshold_s,
            satellites=satellites,
            step=len(self.decisions),
        )

    @property
    def infeasible_cost(self) -> float:
        if self._infeasible_cost is not None:
            return float(self._infeasible_cost)
        return 10.0 * self.cfg.time_threshold_s

    def partial_cost(self, report: EvaluationReport) -> float:
        return report.cost if math.isfinite(report.cost) else self.infeasible_cost

    @property
    def schedule(self) -> Schedule:
        return Schedule(tuple(self.decisions))

    # ------------------------------------------------------------------
    # Internals
    # ------------------------------------------------------------------
    def _set_scenario(self, cfg: ScenarioConfig) -> None:
        if cfg.num_tasks > self.max_tasks or cfg.num_satellites > self.max_satellites:
            raise ScenarioError(
                f"Scenario N={cfg.num_tasks}, M={cfg.num_satellites} exceeds padded dimensions "
                f"N_max={self.max_tasks}, M_max={self.max_satellites}"
            )
        self.cfg = cfg

    def _log_step(self, observation: np.ndarray, action: Tuple[int, int, int], reward: float) -> None:
        if self.trajectory_log is None:
            return
        record = {
            "episode": self._episode,
            "step": len(self.decisions),
            "state": state_hash(observation),
            "action": list(action),
            "reward": reward,
        }
        with self.trajectory_log.open("a", encoding="utf-8") as f:
            f.write(json.dumps(record) + "\n")


class FlattenedActionEnv(gym.ActionWrapper):
    """Exposes the three-head action as one Discrete index for Q-learning."""

    def __init__(self, env: OffloadingEnv):
        super().__init__(env)
        self.locations = env.max_satellites + 1
        self.action_space = spaces.Discrete(env.max_tasks * self.locations * 2)

    def action(self, action: int) -> np.ndarray:
        return np.array(unflatten_action(int(action), self.locations))

    def action_mask(self) -> np.ndarray:
        return self.env.action_mask().flat()


def flatten_action(x_num: int, location: int, redundancy: int, locations: int) -> int:
    return (x_num * locations + location) * 2 + redundancy


def unflatten_action(index: int, locations: int) -> Tuple[int, int, int]:
    pair, redundancy = divmod(index, 2)
    x_num, location = divmod(pair, locations)
    return x_num, location, redundancy
