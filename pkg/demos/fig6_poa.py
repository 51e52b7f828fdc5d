"""Price of anarchy as the alley fills up, L=8.

Run: python demos/fig6_poa.py [episodes]
"""
import sys

from alley_game import AlleyConfig, PolicyKind, consecutive_scenario, price_of_anarchy

n = int(sys.argv[1]) if len(sys.argv) > 1 else 200
cfg = AlleyConfig(length_L=8, collision_cost_k=10)
policies = [PolicyKind.GAME_NO_COMM, PolicyKind.GAME_COMM_TYPES, PolicyKind.GAME_COMM_TYPES_STATE,
            PolicyKind.CENTRAL_AUTHORITY]
print("per side  " + "  ".join(f"{p.value:>22}" for p in policies))
for k in range(1, 5):
    vals = [price_of_anarchy(None, consecutive_scenario(k, cfg), n, policy=p) for p in policies]
    marks = "" if vals[0].exact_optimum else "  (central as denominator)"
    print(f"{k:>8}  " + "  ".join(f"{v.value:22.2f}" for v in vals) + marks)
