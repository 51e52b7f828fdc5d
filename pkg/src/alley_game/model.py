"""Domain types, utility, expected elapsed times and single-slot dynamics.

Geometry: the alley has integer coordinates ``0..L``. Eastbound vehicles enter
at coordinate 0 and leave at ``L``; westbound vehicles do the opposite. Each
endpoint is the entrance *staging* cell of one group: it holds any number of
that group's vehicles and does not block opposing vehicles, which exit
there. Interior cells ``1..L-1`` hold at most one vehicle.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence


class Action(enum.IntEnum):
    FORWARD = 1
    WAIT = 0
    BACKWARD = -1


# Deterministic tie-break order used everywhere.
ACTION_ORDER = (Action.FORWARD, Action.WAIT, Action.BACKWARD)


class Direction(enum.Enum):
    EAST = "east"
    WEST = "west"

    @property
    def sign(self) -> int:
        return _SIGN[self]

    @property
    def opposite(self) -> "Direction":
        return Direction.WEST if self is Direction.EAST else Direction.EAST


_SIGN = {Direction.EAST: 1, Direction.WEST: -1}
_EAST = Direction.EAST


class VType(enum.Enum):
    UR = "UR"  # unselfish, high type
    SR = "SR"  # selfish, low type


@dataclass(frozen=True)
class AlleyConfig:
    length_L: int = 20
    collision_cost_k: int = 10
    sensing_range_D: int = 3
    comm_range: int | None = None
    movement_slot_s: float = 3.0
    comm_slot_s: float = 1.0
    safety_horizon: int | None = None
    cell_size_mm: float = 450.0

    def __post_init__(self):
        if self.comm_range is None:
            object.__setattr__(self, "comm_range", 2 * self.sensing_range_D)
        if self.safety_horizon is None:
            object.__setattr__(self, "safety_horizon", 10 * self.length_L)
        if self.length_L < 2:
            raise ValueError(f"length_L must be >= 2, got {self.length_L}")
        if self.collision_cost_k < 0 or int(self.collision_cost_k) != self.collision_cost_k:
            raise ValueError("collision_cost_k must be a non-negative integer")
        if self.sensing_range_D < 1:
            raise ValueError("sensing_range_D must be >= 1")
        if self.comm_range < self.sensing_range_D:
            raise ValueError("comm_range must be >= sensing_range_D")
        if self.safety_horizon <= 2 * self.length_L:
            raise ValueError("safety_horizon must exceed 2 * length_L")

    @property
    def slot_seconds(self) -> float:
        return self.movement_slot_s + self.comm_slot_s


@dataclass(frozen=True)
class UtilityParams:
    """Block-then-triangle utility shape: flat plateau, then linear decay to 0."""

    plateau_payoff: float = 10.0
    threshold_UR: float = 20.0
    threshold_SR: float = 10.0
    slope: float = 1.0

    def __post_init__(self):
        if self.slope <= 0:
            raise ValueError("slope must be > 0")
        if self.threshold_UR < self.threshold_SR:
            raise ValueError("threshold_UR must be >= threshold_SR")

    @classmethod
    def for_config(cls, config: "AlleyConfig", **overrides) -> "UtilityParams":
        """Thresholds at 2L (UR) and L (SR), with a plateau tall enough that the
        triangle stays positive for every estimate reachable within the horizon."""
        L, k = config.length_L, config.collision_cost_k
        values = dict(plateau_payoff=float((1 + k) * (config.safety_horizon + 1) + 4 * L),
                      threshold_UR=2.0 * L, threshold_SR=float(L), slope=1.0)
        values.update(overrides)
        return cls(**values)

    def threshold(self, vtype: VType) -> float:
        return self.threshold_UR if vtype is VType.UR else self.threshold_SR


@dataclass(frozen=True, slots=True)
class VehicleState:
    id: int
    direction: Direction
    passed_distance: int = 0
    elapsed_time: int = 0
    vtype: VType = VType.SR
    exited: bool = False

    def coord(self, length_L: int) -> int:
        """Absolute coordinate of the vehicle on the alley."""
        if self.direction is _EAST:
            return self.passed_distance
        return length_L - self.passed_distance


@dataclass(frozen=True)
class ActionEvaluation:
    action: Action
    expected_elapsed_time: float
    utility: float


@dataclass(frozen=True)
class CollisionEvent:
    slot: int
    vehicle_ids: frozenset
    cost: int

    def __post_init__(self):
        if len(self.vehicle_ids) < 2:
            raise ValueError("a collision involves at least two vehicles")


def utility(vtype: VType, f: float, params: UtilityParams) -> float:
    thr = params.threshold(vtype)
    if f <= thr:
        return params.plateau_payoff
    return max(0.0, params.plateau_payoff - params.slope * (f - thr))


def evaluate(action: Action, f: float, vtype: VType, params: UtilityParams) -> ActionEvaluation:
    return ActionEvaluation(action, f, utility(vtype, f, params))


def expected_elapsed_time_two_vehicle(me: VehicleState, opponent: VehicleState,
                                      action: Action, config: AlleyConfig) -> float:
    if me.direction is opponent.direction:
        raise ValueError("opponent must travel in the opposite direction")
    L = config.length_L
    forward = L - me.passed_distance
    backward = 2 * L - opponent.passed_distance
    action = Action(action)
    if action is Action.FORWARD:
        rest = forward
    elif action is Action.BACKWARD:
        rest = backward
    else:
        rest = 0.5 * forward + 0.5 * backward + 1
    return me.elapsed_time + rest


def expected_elapsed_time_central(me: VehicleState, x_jstar: int, action: Action,
                                  config: AlleyConfig) -> int:
    action = Action(action)
    if action is Action.WAIT:
        raise ValueError("the central planner only issues FORWARD or BACKWARD")
    L = config.length_L
    x = me.passed_distance
    # (1 - a) / 2 is exactly 0 or 1 here, so integer arithmetic is exact.
    return me.elapsed_time + (L - x) + ((1 - int(action)) // 2) * (L - x_jstar + x)


def resolve_moves(coords: Sequence[int], signs: Sequence[int], actions: Sequence[int],
                  length_L: int):
    """Resolve one slot of movement for the active vehicles.

    Returns ``(final_coords, collision_groups)`` where ``collision_groups`` is
    a tuple of frozensets of indices that collided and stayed put.
    """
    return _resolve(tuple(coords), tuple(signs), tuple(int(a) for a in actions), length_L)


@lru_cache(maxsize=500_000)
def _resolve(coords: tuple, signs: tuple, actions: tuple, length_L: int):
    n = len(coords)
    L = length_L
    target = []
    for c, s, a in zip(coords, signs, actions):
        t = c + s * a
        home = 0 if s > 0 else L
        if (s > 0 and t < home) or (s < 0 and t > home):
            t = home
        target.append(t)
    final = list(target)
    pairs = []

    changed = True
    while changed:
        changed = False
        by_cell: dict[int, list[int]] = {}
        for i in range(n):
            if 0 < final[i] < L:
                by_cell.setdefault(final[i], []).append(i)
        for cell, occupants in by_cell.items():
            if len(occupants) < 2:
                continue
            dirs = {signs[i] for i in occupants}
            if len(dirs) == 2:
                movers = [i for i in occupants if final[i] != coords[i]]
                for i in occupants:
                    for j in occupants:
                        if i < j and signs[i] != signs[j]:
                            pairs.append((i, j))
                for i in movers:
                    final[i] = coords[i]
                changed = True
                break
            stayers = [i for i in occupants if final[i] == coords[i]]
            movers = [i for i in occupants if final[i] != coords[i]]
            if not stayers:
                movers = sorted(movers)[1:]
            for i in movers:
                final[i] = coords[i]
            changed = True
            break
        if changed:
            continue
        for i in range(n):
            if final[i] == coords[i]:
                continue
            for j in range(i + 1, n):
                if final[j] == coords[j]:
                    continue
                if final[i] == coords[j] and final[j] == coords[i]:
                    if signs[i] != signs[j]:
                        pairs.append((i, j))
                    final[i] = coords[i]
                    final[j] = coords[j]
                    changed = True
                    break
            if changed:
                break
    # Checked once per distinct input thanks to the cache.
    if any(not 0 <= c <= L for c in final):
        raise RuntimeError("a vehicle left the alley bounds")
    inner = [c for c in final if 0 < c < L]
    if len(set(inner)) != len(inner):
        raise RuntimeError("two vehicles share an interior cell")
    return tuple(final), tuple(frozenset(g) for g in _components(pairs))


def _components(pairs):
    parent: dict[int, int] = {}

    def find(a):
        while parent.setdefault(a, a) != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j in pairs:
        parent[find(i)] = find(j)
    groups: dict[int, set] = {}
    for a in list(parent):
        groups.setdefault(find(a), set()).add(a)
    return sorted(groups.values(), key=min)


def apply_actions(states: Sequence[VehicleState], actions: Sequence[Action],
                  config: AlleyConfig, slot: int = 0):
    """Advance every vehicle by one slot.

    ``actions`` is aligned with ``states``; entries for exited vehicles are
    ignored.
    """
    if len(actions) != len(states):
        raise ValueError(f"expected {len(states)} actions, got {len(actions)}")
    L = config.length_L
    k = config.collision_cost_k
    active = [i for i, s in enumerate(states) if not s.exited]
    signs = [1 if states[i].direction is _EAST else -1 for i in active]
    coords = [states[i].passed_distance if sg > 0 else L - states[i].passed_distance
              for i, sg in zip(active, signs)]
    acts = [int(actions[i]) for i in active]
    final, groups = resolve_moves(coords, signs, acts, L)

    new_states = list(states)
    penalised = set()
    events = []
    for g in groups:
        ids = frozenset(states[active[i]].id for i in g)
        events.append(CollisionEvent(slot, ids, k))
        penalised.update(g)
    for pos, i in enumerate(active):
        s = states[i]
        x = final[pos] if signs[pos] > 0 else L - final[pos]
        t = s.elapsed_time + 1 + (k if pos in penalised else 0)
        new_states[i] = VehicleState(s.id, s.direction, x, t, s.vtype, x >= L)
    return new_states, events


def make_vehicles(east: Sequence[int], west: Sequence[int], types: Sequence[VType] | None = None,
                  elapsed: Sequence[int] | None = None) -> list[VehicleState]:
    """Build a state vector: eastbound vehicles first, then westbound; ids 0..n-1."""
    dirs = [Direction.EAST] * len(east) + [Direction.WEST] * len(west)
    xs = list(east) + list(west)
    n = len(xs)
    types = list(types) if types is not None else [VType.SR] * n
    elapsed = list(elapsed) if elapsed is not None else [0] * n
    if len(types) != n or len(elapsed) != n:
        raise ValueError("types/elapsed length must match vehicle count")
    return [VehicleState(i, d, x, t, th) for i, (d, x, t, th) in enumerate(zip(dirs, xs, elapsed, types))]
