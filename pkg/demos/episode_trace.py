"""Slot-by-slot trace of one episode, drawn as the alley row.

Run: python demos/episode_trace.py [policy] [seed]
"""
import sys

from alley_game import AlleyConfig, Direction, PolicyKind, Scenario
from alley_game.sim import run_episode

policy = PolicyKind(sys.argv[1]) if len(sys.argv) > 1 else PolicyKind.GAME_COMM_TYPES_STATE
seed = int(sys.argv[2]) if len(sys.argv) > 2 else 3
cfg = AlleyConfig(length_L=10, collision_cost_k=10)
sc = Scenario(config=cfg, east_positions=(0, 1), west_positions=(0, 1), seed=seed)
L = cfg.length_L


def row(states):
    """One character per cell: > or < for a single vehicle, a digit for a staging crowd."""
    cells: dict[int, list[str]] = {}
    for s in states:
        if not s.exited:
            east = s.direction is Direction.EAST
            x = s.passed_distance if east else L - s.passed_distance
            cells.setdefault(x, []).append(">" if east else "<")
    return "".join(str(len(c)) if len(c) > 1 else c[0] if c else "." for c in
                   (cells.get(x, []) for x in range(L + 1)))


trace = []
res = run_episode(sc, policy, trace=trace)
print(f"{policy.value}, seed {seed}, types {[v.value for v in sc.draw_types()]}")
print(f"{'':>4} {row(sc.initial_states())}")
for slot, actions, states in trace:
    acts = " ".join(a.name[0] for a in actions)
    print(f"{slot:>4} {row(states)}  {acts}")
print(f"finished={res.terminated} slots={res.slots_used} elapsed={res.elapsed_times} "
      f"collisions={len(res.collisions)}")
