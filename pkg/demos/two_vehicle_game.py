"""Payoffs and equilibria of the two-vehicle game for a few alley states.

Run: python demos/two_vehicle_game.py
"""
import numpy as np

from alley_game import AlleyConfig, UtilityParams, VType, make_vehicles, solve_two_vehicle_game
from alley_game.strategy import two_vehicle_times

cfg = AlleyConfig(length_L=20, collision_cost_k=10)
params = UtilityParams.for_config(cfg)

for east_x, west_x, types in [(9, 10, (VType.UR, VType.UR)), (4, 15, (VType.UR, VType.SR)),
                              (5, 14, (VType.SR, VType.SR))]:
    me, opp = make_vehicles([east_x], [west_x], types=types)
    print(f"east at {east_x} ({types[0].value}) vs west at {west_x} ({types[1].value})")
    with np.printoptions(precision=1, suppress=True):
        print("  east expected times (rows F/W/B, cols F/W/B):")
        print("  " + str(two_vehicle_times(me, opp, cfg)).replace("\n", "\n  "))
    a = solve_two_vehicle_game(me, opp, params, cfg, {types[1]: 1.0})
    b = solve_two_vehicle_game(opp, me, params, cfg, {types[0]: 1.0})
    print(f"  east plays {a}\n  west plays {b}\n")
