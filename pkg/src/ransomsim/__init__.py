"""Ransomware campaign simulation on segmented networks, with a PPO attacker.

Subpackages:
    scenario     network/scenario definitions, validation, generators
    environment  the attack MDP (actions, observations, defenses, rewards)
    nets         numpy actor/critic networks, analytical gradients, Adam
    trainer      rollout collection, GAE, PPO update loop
    evaluation   policy rollouts, aggregate reports, path exports
    cli          command line frontend
"""

__version__ = "0.1.0"
