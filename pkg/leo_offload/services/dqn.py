"""
DQN baseline over the flattened one-dimensional action space.

Experience replay ring buffer, hard-synced target network, linear
epsilon-greedy decay and masked maxima in the Bellman targets.
"""

from pathlib import Path
from typing import Callable, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field

from ..core.errors import CheckpointError, TrainingDivergedError
from .environment import ActionMask, FlattenedActionEnv, OffloadingEnv, observation_size, unflatten_action
from .nn import AdamOptimizer, Mlp, clip_grad_norm, load_checkpoint, save_checkpoint
from .training import TrainingResult, evaluate_agent, learning_rate, log_row


class DqnHyper(BaseModel):
    """DQN hyperparameters"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    gamma: float = Field(default=0.99, gt=0, le=1)
    lr_initial: float = Field(default=1e-3, gt=0)
    lr_final: float = Field(default=5.76e-7, ge=0)
    lr_mode: Literal["linear", "fixed"] = "linear"
    total_timesteps: int = Field(default=50_000, ge=1)
    buffer_size: int = Field(default=50_000, ge=1)
    batch_size: int = Field(default=64, ge=1)
    learning_starts: int = Field(default=500, ge=0)
    train_freq: int = Field(default=1, ge=1)
    target_update: int = Field(default=500, ge=1)
    epsilon_start: float = Field(default=1.0, ge=0, le=1)
    epsilon_final: float = Field(default=0.05, ge=0, le=1)
    exploration_fraction: float = Field(default=0.3, gt=0, le=1)
    double_q: bool = False
    penalty: float = Field(default=100.0, ge=0)
    hidden_sizes: List[int] = Field(default_factory=lambda: [64, 64])
    max_grad_norm: Optional[float] = Field(default=10.0, gt=0)
    reward_scale: float = Field(default=0.01, gt=0)
    eval_interval: int = Field(default=2048, ge=1)
    eval_episodes: int = Field(default=1, ge=1)
    max_tasks: Optional[int] = Field(default=None, ge=1)
    max_satellites: Optional[int] = Field(default=None, ge=1)

    def lr_at(self, timestep: int) -> float:
        return learning_rate(timestep, self.total_timesteps, self.lr_initial, self.lr_final, self.lr_mode)

    def epsilon_at(self, timestep: int) -> float:
        frac = min(1.0, timestep / (self.exploration_fraction * self.total_timesteps))
        return self.epsilon_start + frac * (self.epsilon_final - self.epsilon_start)


class ReplayBuffer:
    """Fixed-capacity ring of transitions; the next-state mask is stored for the masked max."""

    def __init__(self, capacity: int, obs_dim: int, num_actions: int):
        self.capacity = int(capacity)
        self.observations = np.zeros((capacity, obs_dim))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.next_observations = np.zeros((capacity, obs_dim))
        self.next_masks = np.zeros((capacity, num_actions), dtype=bool)
        self.dones = np.zeros(capacity, dtype=bool)
        self.position = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def add(self, observation: np.ndarray, action: int, reward: float, next_observation: np.ndarray,
            next_mask: np.ndarray, done: bool) -> None:
        i = self.position
        self.observations[i] = observation
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_observations[i] = next_observation
        self.next_masks[i] = next_mask
        self.dones[i] = done
        self.position = (self.position + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> Dict[str, np.ndarray]:
        idx = rng.integers(0, self.size, size=batch_size)
        return {
            "observations": self.observations[idx],
            "actions": self.actions[idx],
            "rewards": self.rewards[idx],
            "next_observations": self.next_observations[idx],
            "next_masks": self.next_masks[idx],
            "dones": self.dones[idx],
        }


def masked_max(q_values: np.ndarray, masks: np.ndarray) -> np.ndarray:
    """Row-wise maximum over allowed actions; rows with no allowed action give 0."""
    masked = np.where(masks, q_values, -np.inf)
    best = masked.max(axis=-1)
    return np.where(np.isfinite(best), best, 0.0)


def bellman_targets(rewards: np.ndarray, dones: np.ndarray, next_q: np.ndarray, next_masks: np.ndarray,
                    gamma: float, next_online_q: Optional[np.ndarray] = None) -> np.ndarray:
    """
    y = r for terminal transitions, else r + gamma * max over allowed a' of Q_target(s', a').

    With ``next_online_q`` the action is chosen by the online network (double Q-learning).
    """
    if next_online_q is None:
        bootstrap = masked_max(next_q, next_masks)
    else:
        choice = np.argmax(np.where(next_masks, next_online_q, -np.inf), axis=-1)
        bootstrap = np.where(next_masks.any(axis=-1), next_q[np.arange(len(choice)), choice], 0.0)
    return rewards + gamma * np.where(dones, 0.0, bootstrap)


class DqnAgent:
    """Q-network over the flattened action index plus its target copy."""

    kind = "dqn"

    def __init__(self, max_tasks: int, max_satellites: int, hidden_sizes: Sequence[int] = (64, 64),
                 rng: Optional[np.random.Generator] = None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.max_tasks = int(max_tasks)
        self.max_satellites = int(max_satellites)
        self.obs_dim = observation_size(self.max_tasks, self.max_satellites)
        self.num_actions = self.max_tasks * (self.max_satellites + 1) * 2
        self.q_net = Mlp([self.obs_dim, *[int(h) for h in hidden_sizes], self.num_actions], rng=rng)
        self.target_net = self.q_net.copy()

    def greedy_index(self, observation: np.ndarray, flat_mask: np.ndarray) -> int:
        q = self.q_net.forward(np.asarray(observation, dtype=np.float64))
        return int(np.argmax(np.where(flat_mask, q, -np.inf)))

    def select(self, observation: np.ndarray, flat_mask: np.ndarray, epsilon: float,
               rng: np.random.Generator) -> int:
        """Epsilon-greedy over the allowed flat indices."""
        if rng.random() < epsilon:
            return int(rng.choice(np.flatnonzero(flat_mask)))
        return self.greedy_index(observation, flat_mask)

    def act(self, observation: np.ndarray, mask: ActionMask, rng: Optional[np.random.Generator] = None,
            greedy: bool = True) -> Tuple[int, int, int]:
        return unflatten_action(self.greedy_index(observation, mask.flat()), self.max_satellites + 1)

    def sync_target(self) -> None:
        self.target_net.copy_from(self.q_net)

    def save(self, path: Union[str, Path]) -> Path:
        meta = {"obs_dim": self.obs_dim, "max_tasks": self.max_tasks, "max_satellites": self.max_satellites}
        return save_checkpoint(path, self.kind, {"q": self.q_net}, meta)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "DqnAgent":
        checkpoint = load_checkpoint(path, kind=cls.kind)
        header = checkpoint.header
        agent = cls.__new__(cls)
        agent.max_tasks = int(header["max_tasks"])
        agent.max_satellites = int(header["max_satellites"])
        agent.obs_dim = observation_size(agent.max_tasks, agent.max_satellites)
        agent.num_actions = agent.max_tasks * (agent.max_satellites + 1) * 2
        agent.q_net = checkpoint.networks["q"]
        if agent.q_net.sizes[0] != agent.obs_dim or agent.q_net.sizes[-1] != agent.num_actions:
            raise CheckpointError("Q-network shape does not match the checkpoint's padded dimensions")
        agent.target_net = agent.q_net.copy()
        return agent


def dqn_step(agent: DqnAgent, batch: Dict[str, np.ndarray], hyper: DqnHyper, lr: float,
             optimizer: AdamOptimizer) -> float:
    """One gradient step on the mean squared TD error; returns the loss."""
    next_online = agent.q_net.forward(batch["next_observations"]) if hyper.double_q else None
    next_q = agent.target_net.forward(batch["next_observations"])
    targets = bellman_targets(batch["rewards"], batch["dones"], next_q, batch["next_masks"],
                              hyper.gamma, next_online)

    q = agent.q_net.forward(batch["observations"])
    rows = np.arange(len(targets))
    error = q[rows, batch["actions"]] - targets
    loss = float(np.mean(error ** 2))
    if not np.isfinite(loss):
        diagnostics = {"loss": loss, "lr": lr, "max_target": float(np.max(np.abs(targets)))}
        logger.error(f"❌ DQN update diverged: {diagnostics}")
        raise TrainingDivergedError("DQN update produced a non-finite loss", diagnostics)

    grad = np.zeros_like(q)
    grad[rows, batch["actions"]] = 2.0 * error / len(targets)
    grads, _ = clip_grad_norm(agent.q_net.backward(grad), hyper.max_grad_norm)
    optimizer.step(grads, lr)
    return loss


def dqn_train(env_factory: Callable[[], Union[OffloadingEnv, FlattenedActionEnv]], hyper: DqnHyper,
              seed: int, eval_seeds: Optional[Sequence[int]] = None) -> TrainingResult:
    """
    Q-learning with replay, target network and epsilon-greedy exploration.

    Uses the same log schema as the PPO trainer.
    """
    rng = np.random.default_rng(seed)
    env = env_factory()
    if not isinstance(env, FlattenedActionEnv):
        env = FlattenedActionEnv(env)
    base = env.unwrapped
    cfg = base.base_cfg
    agent = DqnAgent(
        hyper.max_tasks or base.max_tasks,
        hyper.max_satellites or base.max_satellites,
        hyper.hidden_sizes,
        rng=rng,
    )
    if agent.max_tasks != base.max_tasks or agent.max_satellites != base.max_satellites:
        env = FlattenedActionEnv(OffloadingEnv(cfg, agent.max_tasks, agent.max_satellites, penalty=hyper.penalty))
        base = env.unwrapped
    optimizer = AdamOptimizer(agent.q_net)
    replay = ReplayBuffer(hyper.buffer_size, agent.obs_dim, agent.num_actions)
    seeds = list(eval_seeds) if eval_seeds is not None else [cfg.rng_seed + k for k in range(hyper.eval_episodes)]

    def evaluate(timestep: int) -> Dict[str, float]:
        row = log_row(timestep, evaluate_agent(agent, cfg, seeds, penalty=base.penalty), hyper.lr_at(timestep))
        logger.info(
            f"📈 t={timestep} return={row['mean_return']:.3f} cost={row['mean_cost']:.3f} "
            f"feasible={row['feasible_fraction']:.2f} lr={row['lr']:.3g}"
        )
        return row

    log = [evaluate(0)]
    observation, _ = env.reset()
    for timestep in range(1, hyper.total_timesteps + 1):
        flat_mask = env.action_mask()
        index = agent.select(observation, flat_mask, hyper.epsilon_at(timestep - 1), rng)
        next_observation, reward, terminated, truncated, _ = env.step(index)
        done = terminated or truncated
        replay.add(observation, index, reward * hyper.reward_scale, next_observation, env.action_mask(), done)
        observation = next_observation
        if done:
            observation, _ = env.reset()

        if timestep > hyper.learning_starts and timestep % hyper.train_freq == 0 and len(replay) >= hyper.batch_size:
            dqn_step(agent, replay.sample(hyper.batch_size, rng), hyper, hyper.lr_at(timestep), optimizer)
        if timestep % hyper.target_update == 0:
            agent.sync_target()
        if timestep % hyper.eval_interval == 0 or timestep == hyper.total_timesteps:
            log.append(evaluate(timestep))

    return TrainingResult(agent=agent, log=log)
