"""
Tests for the DQN baseline.
"""

from functools import partial

import numpy as np
import pytest

from leo_offload.services.baselines import brute_force_oracle
from leo_offload.services.dqn import (
    DqnAgent,
    DqnHyper,
    ReplayBuffer,
    bellman_targets,
    dqn_train,
    masked_max,
)
from leo_offload.services.environment import FlattenedActionEnv, OffloadingEnv, unflatten_action
from leo_offload.services.training import evaluate_agent


def test_masked_max_skips_forbidden_actions():
    q = np.array([[1.0, 5.0, 3.0], [2.0, -1.0, 0.5]])
    masks = np.array([[True, False, True], [False, False, False]])
    assert list(masked_max(q, masks)) == [3.0, 0.0]


def test_bellman_targets():
    rewards = np.array([1.0, 2.0])
    dones = np.array([False, True])
    next_q = np.array([[0.5, 4.0, 1.0], [10.0, 10.0, 10.0]])
    masks = np.array([[True, False, True], [True, True, True]])
    targets = bellman_targets(rewards, dones, next_q, masks, 0.9)
    assert targets == pytest.approx([1.0 + 0.9 * 1.0, 2.0])


def test_double_q_uses_online_argmax():
    rewards = np.array([0.0])
    dones = np.array([False])
    next_q = np.array([[1.0, 2.0, 3.0]])
    online = np.array([[9.0, 0.0, 1.0]])
    masks = np.array([[True, True, True]])
    assert bellman_targets(rewards, dones, next_q, masks, 0.5, online) == pytest.approx([0.5])


def test_greedy_action_is_masked_argmax(tiny_cfg):
    agent = DqnAgent(3, 3, hidden_sizes=(8,), rng=np.random.default_rng(0))
    env = FlattenedActionEnv(OffloadingEnv(tiny_cfg))
    observation, _ = env.reset()
    env.step(0)  # task 0 local without redundancy
    observation = env.unwrapped.state().observation()
    mask = env.action_mask()
    index = agent.greedy_index(observation, mask)
    q = agent.q_net.forward(observation)
    assert mask[index]
    assert q[index] == max(q[i] for i in np.flatnonzero(mask))
    assert agent.act(observation, env.unwrapped.action_mask()) == unflatten_action(index, 4)


def test_epsilon_greedy_only_picks_allowed(tiny_cfg):
    agent = DqnAgent(3, 3, hidden_sizes=(8,), rng=np.random.default_rng(0))
    mask = np.zeros(agent.num_actions, dtype=bool)
    mask[[3, 9, 17]] = True
    rng = np.random.default_rng(1)
    observation = np.zeros(agent.obs_dim)
    assert {agent.select(observation, mask, 1.0, rng) for _ in range(100)} <= {3, 9, 17}


def test_epsilon_schedule():
    hyper = DqnHyper(total_timesteps=1000, exploration_fraction=0.5)
    assert hyper.epsilon_at(0) == 1.0
    assert hyper.epsilon_at(250) == pytest.approx(0.525)
    assert hyper.epsilon_at(500) == pytest.approx(0.05)
    assert hyper.epsilon_at(900) == pytest.approx(0.05)


def test_replay_buffer_wraps():
    replay = ReplayBuffer(3, obs_dim=2, num_actions=4)
    for k in range(5):
        replay.add(np.full(2, k), k, float(k), np.full(2, k + 1), np.ones(4, dtype=bool), k == 4)
    assert len(replay) == 3
    assert sorted(replay.actions) == [2, 3, 4]
    batch = replay.sample(8, np.random.default_rng(0))
    assert batch["observations"].shape == (8, 2)
    assert set(batch["actions"]) <= {2, 3, 4}


def test_short_training_run(tiny_cfg):
    hyper = DqnHyper(total_timesteps=300, learning_starts=50, batch_size=16, target_update=100,
                     eval_interval=100, hidden_sizes=[16])
    result = dqn_train(partial(OffloadingEnv, tiny_cfg), hyper, seed=0)
    frame = result.frame()
    assert list(frame["timestep"]) == [0, 100, 200, 300]
    assert frame["lr"].iloc[-1] == hyper.lr_final

    again = dqn_train(partial(OffloadingEnv, tiny_cfg), hyper, seed=0)
    assert frame.equals(again.frame())

    report = evaluate_agent(result.agent, tiny_cfg, [0])[0].report
    oracle = brute_force_oracle(tiny_cfg).result.report
    assert report.penalized_cost(hyper.penalty) >= oracle.cost


def test_agent_checkpoint_round_trip(tmp_path):
    agent = DqnAgent(3, 3, hidden_sizes=(8,), rng=np.random.default_rng(2))
    path = agent.save(tmp_path / "dqn.ckpt")
    loaded = DqnAgent.load(path)
    assert loaded.save(tmp_path / "again.ckpt").read_bytes() == path.read_bytes()
    assert np.array_equal(loaded.target_net.flat_parameters(), agent.q_net.flat_parameters())
