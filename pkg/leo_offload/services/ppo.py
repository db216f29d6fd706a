"""
PPO trainer: clipped surrogate, GAE, value regression and learning-rate decay.

The actor is one MLP whose output is split into three logit heads
(task index, location, redundancy); each head is masked independently and the
joint log-probability is the sum of the head log-probabilities. The critic is
a separate MLP.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field

from ..core.errors import CheckpointError, TrainingDivergedError
from ..models.scenario import ScenarioConfig
from .environment import ActionMask, OffloadingEnv, observation_size
from .nn import AdamOptimizer, Mlp, clip_grad_norm, load_checkpoint, masked_log_softmax, save_checkpoint
from .training import TrainingResult, evaluate_agent, learning_rate, log_row


class PpoHyper(BaseModel):
    """PPO hyperparameters"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    clip_eps: float = Field(default=0.2, gt=0, lt=1)
    gamma: float = Field(default=0.99, gt=0, le=1)
    gae_lambda: float = Field(default=0.95, ge=0, le=1)
    horizon: int = Field(default=2048, ge=1)
    epochs: int = Field(default=10, ge=1)
    minibatch_size: int = Field(default=64, ge=1)
    lr_initial: float = Field(default=1e-3, gt=0)
    lr_final: float = Field(default=5.76e-7, ge=0)
    lr_mode: Literal["linear", "fixed"] = "linear"
    total_timesteps: int = Field(default=1_000_000, ge=1)
    penalty: float = Field(default=100.0, ge=0)
    entropy_coef: float = Field(default=0.01, ge=0)
    hidden_sizes: List[int] = Field(default_factory=lambda: [64, 64])
    max_grad_norm: Optional[float] = Field(default=0.5, gt=0)
    reward_scale: float = Field(default=0.01, gt=0)
    eval_episodes: int = Field(default=1, ge=1)
    max_tasks: Optional[int] = Field(default=None, ge=1)
    max_satellites: Optional[int] = Field(default=None, ge=1)

    def lr_at(self, timestep: int) -> float:
        return learning_rate(timestep, self.total_timesteps, self.lr_initial, self.lr_final, self.lr_mode)


# ----------------------------------------------------------------------
# Rollout storage and advantages
# ----------------------------------------------------------------------
@dataclass
class RolloutBuffer:
    """Transitions of one collection phase."""
    observations: List[np.ndarray] = field(default_factory=list)
    actions: List[Tuple[int, int, int]] = field(default_factory=list)
    masks: List[ActionMask] = field(default_factory=list)
    log_probs: List[float] = field(default_factory=list)
    rewards: List[float] = field(default_factory=list)
    values: List[float] = field(default_factory=list)
    dones: List[bool] = field(default_factory=list)
    advantages: Optional[np.ndarray] = None
    returns: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.rewards)

    def add(self, observation: np.ndarray, action: Tuple[int, int, int], mask: ActionMask,
            log_prob: float, reward: float, value: float, done: bool) -> None:
        self.observations.append(np.asarray(observation, dtype=np.float64))
        self.actions.append(tuple(int(a) for a in action))
        self.masks.append(mask)
        self.log_probs.append(float(log_prob))
        self.rewards.append(float(reward))
        self.values.append(float(value))
        self.dones.append(bool(done))

    def finish(self, gamma: float, gae_lambda: float, last_value: float = 0.0) -> None:
        """Compute advantages and returns once collection is complete."""
        self.advantages, self.returns = compute_gae(
            self.rewards, self.values, self.dones, gamma, gae_lambda, last_value
        )

    def clear(self) -> None:
        for name in ("observations", "actions", "masks", "log_probs", "rewards", "values", "dones"):
            getattr(self, name).clear()
        self.advantages = None
        self.returns = None


def compute_gae(rewards: Sequence[float], values: Sequence[float], dones: Sequence[bool],
                gamma: float, gae_lambda: float, last_value: float = 0.0) -> Tuple[np.ndarray, np.ndarray]:
    """
    Generalized advantage estimation by backward recursion.

    ``dones[t]`` marks that the episode ended after step t, so the bootstrap
    value there is 0. ``last_value`` bootstraps a rollout cut mid-episode.

    Returns:
        (advantages, returns) with returns = advantages + values
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    advantages = np.zeros_like(rewards)
    running = 0.0
    for t in reversed(range(len(rewards))):
        if dones[t]:
            next_value, nonterminal = 0.0, 0.0
        else:
            next_value = values[t + 1] if t + 1 < len(rewards) else last_value
            nonterminal = 1.0
        delta = rewards[t] + gamma * next_value - values[t]
        running = delta + gamma * gae_lambda * nonterminal * running
        advantages[t] = running
    return advantages, advantages + values


def clipped_surrogate(ratio: np.ndarray, advantages: np.ndarray, clip_eps: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Per-sample clipped surrogate and a mask of samples where the unclipped term is selected.

    Only selected samples carry a gradient through the ratio.
    """
    surr1 = ratio * advantages
    surr2 = np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * advantages
    return np.minimum(surr1, surr2), surr1 <= surr2


# ----------------------------------------------------------------------
# Agent
# ----------------------------------------------------------------------
class PpoAgent:
    """Actor-critic pair over padded task/satellite dimensions."""

    kind = "ppo"

    def __init__(self, max_tasks: int, max_satellites: int, hidden_sizes: Sequence[int] = (64, 64),
                 rng: Optional[np.random.Generator] = None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.max_tasks = int(max_tasks)
        self.max_satellites = int(max_satellites)
        self.obs_dim = observation_size(self.max_tasks, self.max_satellites)
        self.head_sizes = (self.max_tasks, self.max_satellites + 1, 2)
        hidden = [int(h) for h in hidden_sizes]
        self.actor = Mlp([self.obs_dim, *hidden, sum(self.head_sizes)], rng=rng, output_scale=0.01)
        self.critic = Mlp([self.obs_dim, *hidden, 1], rng=rng)
        self.old_actor = self.actor.copy()

    @property
    def head_slices(self) -> List[slice]:
        bounds = np.cumsum((0,) + self.head_sizes)
        return [slice(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]

    def head_log_probs(self, net: Mlp, observations: np.ndarray,
                       masks: Sequence[np.ndarray]) -> List[np.ndarray]:
        """Masked log-probabilities of each head for a batch of observations."""
        logits = net.forward(np.atleast_2d(observations))
        return [masked_log_softmax(logits[:, s], m) for s, m in zip(self.head_slices, masks)]

    def act(self, observation: np.ndarray, mask: ActionMask, rng: Optional[np.random.Generator] = None,
            greedy: bool = True) -> Tuple[int, int, int]:
        action, _ = self.sample(observation, mask, rng, greedy, net=self.actor)
        return action

    def sample(self, observation: np.ndarray, mask: ActionMask, rng: Optional[np.random.Generator],
               greedy: bool, net: Optional[Mlp] = None) -> Tuple[Tuple[int, int, int], float]:
        """Draw (or take the argmax of) each head; returns the action and its joint log-prob."""
        heads = self.head_log_probs(net or self.old_actor, observation, [m[None, :] for m in mask.heads()])
        action, joint = [], 0.0
        for log_p in heads:
            log_p = log_p[0]
            if greedy:
                index = int(np.argmax(log_p))
            else:
                p = np.exp(log_p)
                index = int(rng.choice(len(p), p=p / p.sum()))
            action.append(index)
            joint += float(log_p[index])
        return tuple(action), joint

    def value(self, observation: np.ndarray) -> float:
        return float(self.critic.forward(np.atleast_2d(observation))[0, 0])

    def fits(self, cfg: ScenarioConfig) -> bool:
        return cfg.num_tasks <= self.max_tasks and cfg.num_satellites <= self.max_satellites

    def save(self, path: Union[str, Path]) -> Path:
        return save_checkpoint(path, self.kind, {"actor": self.actor, "critic": self.critic}, self.meta())

    def meta(self) -> Dict[str, int]:
        return {"obs_dim": self.obs_dim, "max_tasks": self.max_tasks, "max_satellites": self.max_satellites}

    @classmethod
    def load(cls, path: Union[str, Path]) -> "PpoAgent":
        checkpoint = load_checkpoint(path, kind=cls.kind)
        header = checkpoint.header
        agent = cls.__new__(cls)
        agent.max_tasks = int(header["max_tasks"])
        agent.max_satellites = int(header["max_satellites"])
        agent.obs_dim = observation_size(agent.max_tasks, agent.max_satellites)
        if agent.obs_dim != header["obs_dim"]:
            raise CheckpointError(f"Checkpoint obs_dim {header['obs_dim']} does not match its padded dimensions")
        agent.head_sizes = (agent.max_tasks, agent.max_satellites + 1, 2)
        agent.actor = checkpoint.networks["actor"]
        agent.critic = checkpoint.networks["critic"]
        agent.old_actor = agent.actor.copy()
        return agent


# ----------------------------------------------------------------------
# Update
# ----------------------------------------------------------------------
def _batch_masks(buffer: RolloutBuffer, idx: np.ndarray) -> List[np.ndarray]:
    return [np.stack([buffer.masks[i].heads()[h] for i in idx]) for h in range(3)]


def surrogate_objective(agent: PpoAgent, buffer: RolloutBuffer, clip_eps: float,
                        entropy_coef: float = 0.0) -> float:
    """Clipped surrogate plus entropy bonus of the current actor over the whole buffer."""
    idx = np.arange(len(buffer))
    observations = np.stack(buffer.observations)
    heads = agent.head_log_probs(agent.actor, observations, _batch_masks(buffer, idx))
    actions = np.asarray(buffer.actions)
    new_log_p = sum(h[idx, actions[:, k]] for k, h in enumerate(heads))
    ratio = np.exp(new_log_p - np.asarray(buffer.log_probs))
    surrogate, _ = clipped_surrogate(ratio, _normalized(buffer.advantages), clip_eps)
    return float(surrogate.mean() + entropy_coef * _entropy(heads).mean())


def _normalized(advantages: np.ndarray) -> np.ndarray:
    if len(advantages) < 2:
        return advantages - advantages.mean()
    return (advantages - advantages.mean()) / (advantages.std() + 1e-8)


def _entropy(heads: Sequence[np.ndarray]) -> np.ndarray:
    total = 0.0
    for log_p in heads:
        p = np.exp(log_p)
        total = total - np.sum(np.where(p > 0, p * log_p, 0.0), axis=-1)
    return total


def ppo_update(buffer: RolloutBuffer, agent: PpoAgent, hyper: PpoHyper, lr: float,
               rng: np.random.Generator, actor_opt: AdamOptimizer,
               critic_opt: AdamOptimizer) -> Dict[str, float]:
    """
    F epochs of minibatch ascent on the clipped surrogate and descent on the value loss.

    Afterwards the old actor takes the new parameters and the buffer is cleared.

    Raises:
        TrainingDivergedError: if a loss becomes NaN or parameters stop being finite
    """
    if buffer.advantages is None:
        raise ValueError("Buffer advantages have not been computed")
    n = len(buffer)
    observations = np.stack(buffer.observations)
    actions = np.asarray(buffer.actions)
    old_log_p = np.asarray(buffer.log_probs)
    advantages = _normalized(buffer.advantages)
    returns = buffer.returns
    all_masks = _batch_masks(buffer, np.arange(n))

    stats = {"policy_objective": 0.0, "value_loss": 0.0, "entropy": 0.0, "approx_kl": 0.0, "clip_fraction": 0.0}
    updates = 0
    for epoch in range(hyper.epochs):
        order = rng.permutation(n)
        for start in range(0, n, hyper.minibatch_size):
            idx = order[start:start + hyper.minibatch_size]
            b = len(idx)
            rows = np.arange(b)
            masks = [m[idx] for m in all_masks]

            heads = agent.head_log_probs(agent.actor, observations[idx], masks)
            new_log_p = sum(h[rows, actions[idx, k]] for k, h in enumerate(heads))
            ratio = np.exp(new_log_p - old_log_p[idx])
            surrogate, selected = clipped_surrogate(ratio, advantages[idx], hyper.clip_eps)
            entropy = _entropy(heads)
            objective = surrogate.mean() + hyper.entropy_coef * entropy.mean()

            # d objective / d joint log-prob, per sample
            d_log_p = np.where(selected, ratio * advantages[idx], 0.0) / b
            grad_logits = np.zeros((b, sum(agent.head_sizes)))
            for k, (s, log_p) in enumerate(zip(agent.head_slices, heads)):
                p = np.exp(log_p)
                onehot = np.zeros_like(p)
                onehot[rows, actions[idx, k]] = 1.0
                safe_log_p = np.where(p > 0, log_p, 0.0)
                head_entropy = -np.sum(p * safe_log_p, axis=-1, keepdims=True)
                d_entropy = -p * (safe_log_p + head_entropy)
                grad_logits[:, s] = d_log_p[:, None] * (onehot - p) + hyper.entropy_coef * d_entropy / b
            # ascent on the objective = descent on its negative
            actor_grads, _ = clip_grad_norm(agent.actor.backward(-grad_logits), hyper.max_grad_norm)
            actor_opt.step(actor_grads, lr)

            values = agent.critic.forward(observations[idx])[:, 0]
            value_loss = float(np.mean((values - returns[idx]) ** 2))
            critic_grads, _ = clip_grad_norm(
                agent.critic.backward((2.0 * (values - returns[idx]) / b)[:, None]), hyper.max_grad_norm
            )
            critic_opt.step(critic_grads, lr)

            if not (np.isfinite(objective) and np.isfinite(value_loss)) or not (
                agent.actor.is_finite() and agent.critic.is_finite()
            ):
                diagnostics = {
                    "epoch": epoch, "objective": float(objective), "value_loss": value_loss,
                    "max_ratio": float(np.max(ratio)), "lr": lr,
                }
                logger.error(f"❌ PPO update diverged: {diagnostics}")
                raise TrainingDivergedError("PPO update produced a non-finite loss", diagnostics)

            stats["policy_objective"] += float(surrogate.mean())
            stats["value_loss"] += value_loss
            stats["entropy"] += float(entropy.mean())
            stats["approx_kl"] += float(np.mean(old_log_p[idx] - new_log_p))
            stats["clip_fraction"] += float(np.mean(np.abs(ratio - 1.0) > hyper.clip_eps))
            updates += 1

    agent.old_actor.copy_from(agent.actor)
    buffer.clear()
    return {key: value / max(updates, 1) for key, value in stats.items()}


# ----------------------------------------------------------------------
# Training loop
# ----------------------------------------------------------------------
def train(env_factory: Callable[[], OffloadingEnv], hyper: PpoHyper, seed: int,
          eval_seeds: Optional[Sequence[int]] = None) -> TrainingResult:
    """
    Alternate T-step collection with the old actor and PPO updates.

    Logs a greedy evaluation row at timestep 0, after every update round and
    at exactly ``total_timesteps``.
    """
    rng = np.random.default_rng(seed)
    env = env_factory()
    cfg = env.base_cfg
    agent = PpoAgent(
        hyper.max_tasks or env.max_tasks,
        hyper.max_satellites or env.max_satellites,
        hyper.hidden_sizes,
        rng=rng,
    )
    if agent.max_tasks != env.max_tasks or agent.max_satellites != env.max_satellites:
        env = OffloadingEnv(cfg, agent.max_tasks, agent.max_satellites, penalty=hyper.penalty)
    actor_opt = AdamOptimizer(agent.actor)
    critic_opt = AdamOptimizer(agent.critic)
    seeds = list(eval_seeds) if eval_seeds is not None else [cfg.rng_seed + k for k in range(hyper.eval_episodes)]

    def evaluate(timestep: int) -> Dict[str, float]:
        row = log_row(timestep, evaluate_agent(agent, cfg, seeds, penalty=env.penalty), hyper.lr_at(timestep))
        logger.info(
            f"📈 t={timestep} return={row['mean_return']:.3f} cost={row['mean_cost']:.3f} "
            f"feasible={row['feasible_fraction']:.2f} lr={row['lr']:.3g}"
        )
        return row

    log = [evaluate(0)]
    buffer = RolloutBuffer()
    observation, info = env.reset()
    timestep = 0
    while timestep < hyper.total_timesteps:
        steps = min(hyper.horizon, hyper.total_timesteps - timestep)
        for _ in range(steps):
            mask = info["action_mask"]
            action, log_p = agent.sample(observation, mask, rng, greedy=False)
            value = agent.value(observation)
            next_observation, reward, terminated, truncated, info = env.step(action)
            done = terminated or truncated
            buffer.add(observation, action, mask, log_p, reward * hyper.reward_scale, value, done)
            observation = next_observation
            if done:
                observation, info = env.reset()
        timestep += steps

        last_value = 0.0 if buffer.dones[-1] else agent.value(observation)
        buffer.finish(hyper.gamma, hyper.gae_lambda, last_value)
        lr = hyper.lr_at(timestep - steps)
        stats = ppo_update(buffer, agent, hyper, lr, rng, actor_opt, critic_opt)
        logger.debug(f"PPO round ending at t={timestep}: {stats}")
        log.append(evaluate(timestep))

    return TrainingResult(agent=agent, log=log)
