"""Rollout collection, generalized advantage estimation, and the PPO loop.

The trainer only needs an environment exposing `reset(seed) -> Observation`,
`step(index) -> StepOutcome`, `n_actions`, `obs_dim` and the episode
counters (`encrypted_count`, `compromised_count`, `clock`, `step_count`),
so tests can substitute stub environments.

Rollouts are fixed-horizon: episodes are cut at the horizon boundary and
resume in the next iteration; the value of the dangling state bootstraps
the advantage recursion.  With `workers = N`, the horizon is split into N
deterministic slices collected by N independent environments and
concatenated in worker order, so results are identical however the slices
are scheduled.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import nets
from .environment import RansomwareEnv
from .scenario import ScenarioConfig, scenario_hash


class TrainingDivergedError(RuntimeError):
    """Raised when a loss or gradient stops being finite."""


@dataclass(frozen=True)
class PPOConfig:
    """Hyperparameters; defaults follow the published tuning."""

    horizon: int = 4096
    minibatch_size: int = 64
    epochs: int = 10
    clip_eps: float = 0.1
    entropy_coef: float = 0.005
    gamma: float = 0.999
    lam: float = 0.95
    lr_actor: float = 1e-5
    lr_critic: float = 3e-4
    total_episodes: int = 3000
    seed: int = 0
    workers: int = 1
    hidden: tuple[int, ...] = (200, 200)
    checkpoint_every: int = 0  # iterations; 0 disables periodic checkpoints

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be positive")
        if not 1 <= self.minibatch_size <= self.horizon:
            raise ValueError("minibatch_size must be in [1, horizon]")
        if self.horizon % self.minibatch_size:
            raise ValueError("minibatch_size must divide horizon")
        if self.epochs < 1:
            raise ValueError("epochs must be positive")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must be in (0, 1]")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lam must be in [0, 1]")
        if self.clip_eps <= 0.0:
            raise ValueError("clip_eps must be positive")
        if self.entropy_coef < 0.0:
            raise ValueError("entropy_coef must be non-negative")
        if self.lr_actor <= 0.0 or self.lr_critic <= 0.0:
            raise ValueError("learning rates must be positive")
        if self.total_episodes < 0:
            raise ValueError("total_episodes must be non-negative")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if self.horizon % self.workers:
            raise ValueError("workers must divide horizon")
        if self.checkpoint_every < 0:
            raise ValueError("checkpoint_every must be non-negative")


@dataclass
class EpisodeRecord:
    """One finished episode, as written to the training curve CSV."""

    episode: int
    reward: float
    steps: int
    encrypted: int
    compromised: int
    clock_s: float


CURVE_HEADER = "episode,reward,steps,encrypted,compromised,clock_s"


def curve_to_csv(records) -> str:
    lines = [CURVE_HEADER]
    for r in records:
        lines.append(
            f"{r.episode},{r.reward!r},{r.steps},{r.encrypted},{r.compromised},{r.clock_s!r}"
        )
    return "\n".join(lines) + "\n"


def parse_curve_csv(text: str) -> list[EpisodeRecord]:
    lines = [ln for ln in text.splitlines() if ln]
    if not lines or lines[0] != CURVE_HEADER:
        raise ValueError("not a training curve CSV")
    out = []
    for ln in lines[1:]:
        ep, rew, steps, enc, comp, clock = ln.split(",")
        out.append(EpisodeRecord(int(ep), float(rew), int(steps),
                                 int(enc), int(comp), float(clock)))
    return out


@dataclass
class RolloutBuffer:
    """Fixed-horizon trajectory slice plus room for GAE outputs."""

    obs: np.ndarray        # (T, obs_dim)
    masks: np.ndarray      # (T, n_actions) bool
    actions: np.ndarray    # (T,) int64
    log_probs: np.ndarray  # (T,)
    rewards: np.ndarray    # (T,)
    values: np.ndarray     # (T,)
    dones: np.ndarray      # (T,) bool; True when s_{t+1} is terminal
    bootstrap_value: float
    advantages: Optional[np.ndarray] = None
    value_targets: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return self.rewards.shape[0]


def compute_gae(buffer: RolloutBuffer, gamma: float, lam: float):
    """Truncated generalized advantage estimation.

    delta_t = r_t + gamma * V(s_{t+1}) * (1 - done_t) - V(s_t)
    A_t     = sum_k (gamma*lam)^k delta_{t+k}, cut at episode ends; the
    dangling tail bootstraps with `bootstrap_value`.

    Returns (advantages, value_targets) with targets = A + V.
    """
    T = len(buffer)
    adv = np.zeros(T, dtype=np.float64)
    running = 0.0
    for t in range(T - 1, -1, -1):
        if buffer.dones[t]:
            next_value = 0.0
            running = 0.0
        elif t == T - 1:
            next_value = buffer.bootstrap_value
        else:
            next_value = buffer.values[t + 1]
        delta = buffer.rewards[t] + gamma * next_value - buffer.values[t]
        running = delta + gamma * lam * running
        adv[t] = running
    return adv, adv + buffer.values


class RolloutCollector:
    """Owns one environment and carries partial episodes across horizons."""

    def __init__(self, env, seed: int):
        self.env = env
        self.action_rng = np.random.RandomState(seed)
        self.reset_rng = np.random.RandomState(seed + 1_000_003)
        self.obs = env.reset(seed=int(self.reset_rng.randint(0, 2**31 - 1)))
        self._ep_reward = 0.0

    def collect(self, params: nets.PolicyParams, horizon: int):
        """Returns (RolloutBuffer, finished episode records without numbers)."""
        env = self.env
        T = horizon
        obs_buf = np.empty((T, env.obs_dim), dtype=np.float64)
        mask_buf = np.empty((T, env.n_actions), dtype=bool)
        actions = np.empty(T, dtype=np.int64)
        log_probs = np.empty(T, dtype=np.float64)
        rewards = np.empty(T, dtype=np.float64)
        values = np.empty(T, dtype=np.float64)
        dones = np.zeros(T, dtype=bool)
        episodes = []

        obs = self.obs
        for t in range(T):
            dist = nets.policy_forward(params, obs.features, obs.mask)
            a = nets.sample_action(dist, self.action_rng)
            obs_buf[t] = obs.features
            mask_buf[t] = obs.mask
            actions[t] = a
            log_probs[t] = dist.log_probs[a]
            values[t] = nets.value_forward(params, obs.features)
            out = env.step(a)
            rewards[t] = out.reward
            dones[t] = out.done
            self._ep_reward += out.reward
            if out.done:
                episodes.append(EpisodeRecord(
                    episode=-1,
                    reward=self._ep_reward,
                    steps=env.step_count,
                    encrypted=env.encrypted_count,
                    compromised=env.compromised_count,
                    clock_s=float(env.clock),
                ))
                self._ep_reward = 0.0
                obs = env.reset(seed=int(self.reset_rng.randint(0, 2**31 - 1)))
            else:
                obs = out.observation
        self.obs = obs
        bootstrap = 0.0 if dones[T - 1] else float(nets.value_forward(params, obs.features))
        buf = RolloutBuffer(obs_buf, mask_buf, actions, log_probs,
                            rewards, values, dones, bootstrap)
        return buf, episodes


def collect_rollout(env, params: nets.PolicyParams, horizon: int, seed: int = 0):
    """One-shot collection with a fresh collector; useful in tests."""
    return RolloutCollector(env, seed).collect(params, horizon)


def ppo_update(
    params: nets.PolicyParams,
    opt: nets.OptimizerState,
    buffers: list[RolloutBuffer],
    cfg: PPOConfig,
    rng: np.random.RandomState,
) -> dict:
    """K epochs of shuffled-minibatch updates on the season's data.

    Advantages are normalized within each minibatch.  Returns mean stats:
    actor_loss, critic_loss, entropy, clip_fraction.
    """
    obs = np.concatenate([b.obs for b in buffers])
    masks = np.concatenate([b.masks for b in buffers])
    actions = np.concatenate([b.actions for b in buffers])
    old_logp = np.concatenate([b.log_probs for b in buffers])
    advantages = np.concatenate([b.advantages for b in buffers])
    targets = np.concatenate([b.value_targets for b in buffers])
    T = obs.shape[0]

    sums = {"actor_loss": 0.0, "critic_loss": 0.0, "entropy": 0.0, "clip_fraction": 0.0}
    n_batches = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(T)
        for start in range(0, T, cfg.minibatch_size):
            idx = order[start:start + cfg.minibatch_size]
            adv = advantages[idx]
            adv = (adv - adv.mean()) / (adv.std() + 1e-8)
            grad_a, stats = nets.backprop_actor(
                params.actor, obs[idx], masks[idx], actions[idx],
                old_logp[idx], adv, cfg.clip_eps, cfg.entropy_coef,
            )
            grad_c, critic_loss = nets.backprop_critic(
                params.critic, obs[idx], targets[idx]
            )
            if not (
                np.isfinite(stats["actor_loss"])
                and np.isfinite(critic_loss)
                and np.isfinite(grad_a.flat).all()
                and np.isfinite(grad_c.flat).all()
            ):
                raise TrainingDivergedError(
                    f"non-finite loss or gradient (actor_loss={stats['actor_loss']}, "
                    f"critic_loss={critic_loss})"
                )
            nets.adam_step(params.actor.flat, grad_a.flat, opt.actor)
            nets.adam_step(params.critic.flat, grad_c.flat, opt.critic)
            sums["actor_loss"] += stats["actor_loss"]
            sums["critic_loss"] += critic_loss
            sums["entropy"] += stats["entropy"]
            sums["clip_fraction"] += stats["clip_fraction"]
            n_batches += 1
    return {k: v / n_batches for k, v in sums.items()}


@dataclass
class TrainResult:
    params: nets.PolicyParams
    opt: nets.OptimizerState
    curve: list[EpisodeRecord]
    iterations: int
    episodes: int


def train(
    scenario: ScenarioConfig,
    cfg: PPOConfig,
    out_dir: Optional[str] = None,
    curve_path: Optional[str] = None,
    resume: Optional[str] = None,
    progress: Optional[Callable[[dict], None]] = None,
    env_factory: Optional[Callable[[int], object]] = None,
) -> TrainResult:
    """Train until `cfg.total_episodes` episodes have finished.

    Writes curve rows to `curve_path` as they complete and, if `out_dir`
    is given, a checkpoint at every `checkpoint_every` iterations plus a
    final one.  `resume` restarts from a saved checkpoint (episode and
    iteration counters continue).
    """
    if env_factory is None:
        env_factory = lambda s: RansomwareEnv(scenario, seed=s)
    envs = [env_factory(cfg.seed * 10007 + w) for w in range(cfg.workers)]
    obs_dim, action_dim = envs[0].obs_dim, envs[0].n_actions

    episodes_done = 0
    iteration = 0
    if resume is not None:
        params, opt, meta = nets.load_checkpoint(resume)
        nets.ensure_dims(params, obs_dim, action_dim)
        if opt is None:
            opt = nets.OptimizerState.create(params, cfg.lr_actor, cfg.lr_critic)
        episodes_done = int(meta.get("episodes", 0))
        iteration = int(meta.get("iterations", 0))
    else:
        params = nets.create_policy(obs_dim, action_dim, seed=cfg.seed, hidden=cfg.hidden)
        opt = nets.OptimizerState.create(params, cfg.lr_actor, cfg.lr_critic)

    update_rng = np.random.RandomState(cfg.seed + 777_613)
    collectors = [
        RolloutCollector(envs[w], seed=cfg.seed * 92_821 + w) for w in range(cfg.workers)
    ]

    curve: list[EpisodeRecord] = []
    curve_fh = None
    if curve_path is not None:
        curve_fh = open(curve_path, "w", encoding="utf-8")
        curve_fh.write(CURVE_HEADER + "\n")
        curve_fh.flush()

    def meta_dict():
        return {
            "scenario_hash": scenario_hash(scenario),
            "rho": scenario.rho,
            "episodes": episodes_done,
            "iterations": iteration,
        }

    slice_len = cfg.horizon // cfg.workers
    try:
        while episodes_done < cfg.total_episodes:
            buffers = []
            fresh_records = []
            for coll in collectors:  # worker order fixes the concatenation
                buf, eps = coll.collect(params, slice_len)
                buf.advantages, buf.value_targets = compute_gae(buf, cfg.gamma, cfg.lam)
                buffers.append(buf)
                fresh_records.extend(eps)
            for rec in fresh_records:
                episodes_done += 1
                rec.episode = episodes_done
                curve.append(rec)
                if curve_fh is not None:
                    curve_fh.write(
                        f"{rec.episode},{rec.reward!r},{rec.steps},"
                        f"{rec.encrypted},{rec.compromised},{rec.clock_s!r}\n"
                    )
            if curve_fh is not None:
                curve_fh.flush()

            try:
                stats = ppo_update(params, opt, buffers, cfg, update_rng)
            except TrainingDivergedError:
                if out_dir is not None:
                    nets.save_checkpoint(
                        os.path.join(out_dir, "diverged.npz"), params, opt, meta_dict()
                    )
                raise
            iteration += 1
            if progress is not None:
                recent = curve[-20:]
                progress({
                    "iteration": iteration,
                    "episodes": episodes_done,
                    "recent_reward": (
                        float(np.mean([r.reward for r in recent])) if recent else float("nan")
                    ),
                    **stats,
                })
            if (
                out_dir is not None
                and cfg.checkpoint_every
                and iteration % cfg.checkpoint_every == 0
            ):
                nets.save_checkpoint(
                    os.path.join(out_dir, "checkpoint.npz"), params, opt, meta_dict()
                )
    finally:
        if curve_fh is not None:
            curve_fh.close()

    if out_dir is not None:
        nets.save_checkpoint(
            os.path.join(out_dir, "checkpoint.npz"), params, opt, meta_dict()
        )
    return TrainResult(params, opt, curve, iteration, episodes_done)
