"""Train a short PPO run and compare it against random play.

A few hundred episodes is enough to see the curve move; pass a bigger
budget for a policy that reliably clears all three targets.

Run:  python3 demos/03_train_small.py [episodes]
"""

import sys

import numpy as np

from ransomsim import evaluation as ev
from ransomsim import trainer
from ransomsim.environment import RansomwareEnv
from ransomsim.scenario import generate_desk_scale

episodes = int(sys.argv[1]) if len(sys.argv) > 1 else 600
cfg = generate_desk_scale()


def show(update):
    print(f"  iter {update['iteration']:>3}  episodes {update['episodes']:>5}"
          f"  recent reward {update['recent_reward']:>8.1f}"
          f"  entropy {update['entropy']:.3f}")


print(f"training for {episodes} episodes on the desk-scale scenario")
result = trainer.train(cfg, trainer.PPOConfig(total_episodes=episodes, seed=0),
                       progress=show)

# random baseline over valid actions only
env = RansomwareEnv(cfg, seed=99)
rng = np.random.RandomState(99)
random_rewards = []
for _ in range(50):
    obs = env.reset(seed=int(rng.randint(0, 2**31 - 1)))
    total, done = 0.0, False
    while not done:
        out = env.step(int(rng.choice(np.flatnonzero(obs.mask))))
        total, done, obs = total + out.reward, out.done, out.observation
    random_rewards.append(total)

trajs = ev.rollout_policy(cfg, result.params, 50, mode="sample", seed=1)
report = ev.aggregate(trajs, scenario=cfg, label="trained")

print(f"\nrandom play : mean reward {np.mean(random_rewards):8.1f}")
print(f"trained     : mean reward {report.mean['reward']:8.1f}"
      f"  (steps {report.mean['steps']:.1f},"
      f" encrypted {report.mean['encrypted']:.2f} of 3)")
print("\nmost-encrypted hosts:")
for addr, freq in ev.host_frequency_ranking(report, 5):
    print(f"  {addr}  {freq:.2f}")
