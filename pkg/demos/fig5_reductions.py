"""Mean elapsed time per policy for one vehicle per side, relative to Random.

Run: python demos/fig5_reductions.py [episodes]
"""
import sys

import numpy as np

from alley_game import AlleyConfig, PolicyKind, consecutive_scenario, run_experiment
from alley_game.sim import paired_reduction

n = int(sys.argv[1]) if len(sys.argv) > 1 else 2000
sc = consecutive_scenario(1, AlleyConfig(length_L=20, collision_cost_k=10))
policies = [PolicyKind.RANDOM, PolicyKind.GAME_NO_COMM, PolicyKind.GAME_COMM_TYPES,
            PolicyKind.GAME_COMM_TYPES_STATE]
stats = {p: run_experiment(sc, p, n) for p in policies}
base = stats[PolicyKind.RANDOM].per_episode_mean
print(f"{'policy':<24}{'mean':>9}{'unfinished':>12}{'reduction':>11}  95% CI")
for p, s in stats.items():
    r = paired_reduction(base, s.per_episode_mean)
    print(f"{p.value:<24}{np.mean(s.per_episode_mean):9.1f}{s.non_termination_rate:12.3f}"
          f"{r.percent:10.1f}%  [{r.ci_low:.1f}, {r.ci_high:.1f}]")
