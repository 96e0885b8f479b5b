"""Step through one scripted campaign and watch the defenses react.

The desk-scale network has three value-1000 hosts behind a firewall tree;
every other machine except the entry point carries honeyfiles.  The script
walks the intended path to one target, then deliberately springs the traps
to show flagging and the episode cutoff.

Run:  python3 demos/02_attack_walkthrough.py
"""

import numpy as np

from ransomsim.environment import Action, RansomwareEnv
from ransomsim.scenario import generate_desk_scale

cfg = generate_desk_scale()
env = RansomwareEnv(cfg, seed=7)
env.reset(seed=7)


def act(kind, target, exploit_id=None, retries=8):
    """Run one action, retrying failed exploit rolls; prints the outcome."""
    index = env.action_to_index(Action(kind, target, exploit_id))
    for _ in range(retries):
        if not env.action_mask()[index]:
            raise RuntimeError(f"{kind} on {target} is not valid here")
        out = env.step(index)
        tag = "ok " if out.info["success"] else "FAIL"
        print(f"  [{tag}] {kind:<11} {target}  reward {out.reward:+8.1f}"
              f"  clock {env.clock:6.0f}s")
        if out.info["success"] or kind != "exploit":
            return out
    raise RuntimeError("exploit kept failing")


print("phase 1: reach the database host behind subnet 1")
act("subnet_scan", (0, 0))          # reveals subnets 0, 1, 2
act("exploit", (1, 1), exploit_id=0)  # openssh crosses the 0-1 edge
act("subnet_scan", (1, 1))          # reveals subnet 3
act("exploit", (3, 1), exploit_id=3)  # sql_monitor crosses the 1-3 edge
act("file_scan", (3, 1))            # reveals the payout, finds no traps
act("encrypt", (3, 1))              # 50 + 1000 minus the detection penalty

print("\nphase 2: blind encryption springs honeyfile traps")
act("exploit", (0, 2), exploit_id=1)   # ftp, same subnet as the entry
for target, exploit_id in [((0, 2), None), ((1, 1), None), ((1, 0), 2)]:
    if exploit_id is not None:
        act("exploit", target, exploit_id=exploit_id)
    out = act("encrypt", target)
    print(f"         flagged hosts now {env.flagged_count}, done={out.done}")

print(f"\nepisode over: reason={env.termination_reason!r}, "
      f"steps={env.step_count}, encrypted={env.encrypted_count}, "
      f"isolated={env.isolated_count}")
assert env.termination_reason == "flag_threshold"

# the same trap is harmless after a file scan finds the honeyfiles
env.reset(seed=11)
act("subnet_scan", (0, 0))
act("exploit", (0, 2), exploit_id=1)
act("file_scan", (0, 2))
out = act("encrypt", (0, 2))
print(f"\nafter scanning first, encrypting {(0, 2)} succeeds "
      f"(success={out.info['success']}) and nothing is flagged "
      f"({env.flagged_count} flags)")

obs = env.reset(seed=3)
print(f"\nobservation vector: {obs.features.shape[0]} features, "
      f"{int(obs.mask.sum())} of {obs.mask.size} actions valid at reset")
print(int(np.flatnonzero(obs.mask).size), "legal openings all touch", cfg.start_host)
