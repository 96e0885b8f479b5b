"""The defender's move: honeyfile the hosts the attacker favors.

Full loop: train an attacker, rank the hosts it encrypts, plant honeyfiles
there, show the frozen policy collapsing, then retrain against the hardened
network and compare all three experiments side by side.

The default budget keeps the demo around two minutes; the effect is much
cleaner with 5000-episode budgets.

Run:  python3 demos/04_honeyfile_countermeasure.py [episodes]
"""

import sys

from ransomsim import evaluation as ev
from ransomsim import trainer
from ransomsim.scenario import add_honeyfiles, generate_desk_scale

episodes = int(sys.argv[1]) if len(sys.argv) > 1 else 1500
cfg = generate_desk_scale()
ppo = trainer.PPOConfig(total_episodes=episodes, seed=0)


def evaluate(scenario, params, label, seed):
    trajs = ev.rollout_policy(scenario, params, 100, mode="sample", seed=seed)
    report = ev.aggregate(trajs, scenario=scenario, label=label)
    print(f"  {label:<10} reward {report.mean['reward']:8.1f}"
          f"  encrypted {report.mean['encrypted']:.2f}")
    return report


print(f"1) train the attacker ({episodes} episodes)")
first = trainer.train(cfg, ppo)
baseline = evaluate(cfg, first.params, "baseline", seed=424242)

print("2) honeyfile the five most-encrypted hosts")
top = ev.host_frequency_ranking(baseline, 5)
for addr, freq in top:
    print(f"  trap {addr} (encrypted in {freq:.0%} of episodes)")
hardened = add_honeyfiles(cfg, [addr for addr, _ in top])

print("3) the old policy walks into the traps")
frozen = evaluate(hardened, first.params, "frozen", seed=515151)

print(f"4) retrain against the hardened network ({episodes} episodes)")
second = trainer.train(hardened, ppo)
retrained = evaluate(hardened, second.params, "retrained", seed=626262)

print("\nside by side (deltas against the previous column):")
print(ev.comparison_to_csv(ev.compare_experiments([baseline, frozen, retrained])))
