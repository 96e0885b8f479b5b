"""Shared fixtures for the slow end-to-end checks.

Training runs are expensive, so the desk-scale policies are trained once
per session and reused by every check that needs them.
"""

import dataclasses
import time

import numpy as np
import pytest

from ransomsim import evaluation as ev
from ransomsim import trainer as tr
from ransomsim.environment import RansomwareEnv
from ransomsim.scenario import generate_desk_scale

DESK_EPISODES = 5000
RHO20_EPISODES = 4000
EVAL_EPISODES = 100


def masked_random_rollouts(cfg, episodes, seed):
    """Reward/step/encrypted stats for a uniform policy over valid actions."""
    env = RansomwareEnv(cfg, seed=seed)
    rng = np.random.RandomState(seed)
    rewards, steps, encrypted = [], [], []
    for _ in range(episodes):
        obs = env.reset(seed=int(rng.randint(0, 2**31 - 1)))
        total = 0.0
        done = False
        while not done:
            out = env.step(int(rng.choice(np.flatnonzero(obs.mask))))
            total += out.reward
            done = out.done
            obs = out.observation
        rewards.append(total)
        steps.append(env.step_count)
        encrypted.append(env.encrypted_count)
    return np.array(rewards), np.array(steps), np.array(encrypted)


@pytest.fixture(scope="session")
def desk_cfg():
    return generate_desk_scale(0)


def _timed_train(scenario, cfg):
    t0 = time.perf_counter()
    result = tr.train(scenario, cfg)
    result.wall_seconds = time.perf_counter() - t0
    return result


@pytest.fixture(scope="session")
def trained_rho1(desk_cfg):
    cfg = tr.PPOConfig(total_episodes=DESK_EPISODES, seed=0)
    return _timed_train(desk_cfg, cfg)


@pytest.fixture(scope="session")
def trained_rho20(desk_cfg):
    scenario = dataclasses.replace(desk_cfg, rho=20.0)
    cfg = tr.PPOConfig(total_episodes=RHO20_EPISODES, seed=0)
    return _timed_train(scenario, cfg)


@pytest.fixture(scope="session")
def eval_rho1(desk_cfg, trained_rho1):
    trajectories = ev.rollout_policy(
        desk_cfg, trained_rho1.params, EVAL_EPISODES, mode="sample", seed=424242
    )
    report = ev.aggregate(trajectories, scenario=desk_cfg, label="baseline")
    return trajectories, report
