"""Central-authority planner and the exhaustive min-max oracle."""

from __future__ import annotations

import heapq
import itertools
import logging
from dataclasses import dataclass
from typing import Sequence

from .model import (Action, AlleyConfig, Direction, VehicleState,
                    expected_elapsed_time_central, resolve_moves)

log = logging.getLogger(__name__)

ORACLE_MAX_VEHICLES = 4
ORACLE_MAX_LENGTH = 8


@dataclass(frozen=True)
class OpponentSummary:
    x_jstar: int
    opposing_count: int


def opponent_summary(me: VehicleState, states: Sequence[VehicleState]) -> OpponentSummary | None:
    """Least-progressed opposing vehicle, i.e. the one that exits last."""
    xs = [s.passed_distance for s in states
          if not s.exited and s.direction is not me.direction]
    if not xs:
        return None
    return OpponentSummary(min(xs), len(xs))


def priority_direction(states: Sequence[VehicleState]) -> Direction:
    live = [s for s in states if not s.exited]
    if not live:
        raise ValueError("all vehicles have exited")
    x_max = max(s.passed_distance for s in live)
    leaders = {s.direction for s in live if s.passed_distance == x_max}
    return Direction.EAST if Direction.EAST in leaders else Direction.WEST


def _predict(states: Sequence[VehicleState], config: AlleyConfig, high: Direction) -> dict:
    predicted = {}
    for s in states:
        if s.exited:
            predicted[s.id] = s.elapsed_time
            continue
        summary = opponent_summary(s, states)
        if summary is None or s.direction is high:
            predicted[s.id] = expected_elapsed_time_central(s, 0, Action.FORWARD, config)
        else:
            predicted[s.id] = expected_elapsed_time_central(s, summary.x_jstar, Action.BACKWARD, config)
    return predicted


def choose_priority(states: Sequence[VehicleState], config: AlleyConfig) -> Direction:
    """Group that drives forward this slot.

    Both assignments are scored by their predicted worst finish time; the
    lower one wins, and the group holding the furthest-progressed vehicle
    wins ties.
    """
    by_x = priority_direction(states)
    scores = {d: max(_predict(states, config, d).values()) for d in Direction}
    return min(Direction, key=lambda d: (scores[d], d is not by_x))


def plan_central(states: Sequence[VehicleState], config: AlleyConfig) -> list[Action]:
    high = choose_priority(states, config)
    return [Action.WAIT if s.exited else
            (Action.FORWARD if s.direction is high else Action.BACKWARD)
            for s in states]


def central_prediction(states: Sequence[VehicleState], config: AlleyConfig):
    """Predicted finish time per vehicle under the central plan, and their max."""
    predicted = _predict(states, config, choose_priority(states, config))
    return predicted, max(predicted.values())


def minmax_oracle(states: Sequence[VehicleState], config: AlleyConfig,
                  horizon: int | None = None):
    """Exact min over joint action sequences of the max final elapsed time.

    Best-first search on the admissible bound ``max_i(elapsed_i + remaining_i)``
    with Pareto dominance pruning over ``(elapsed..., slots)`` per position
    tuple. Returns ``(value, schedule)`` where ``schedule`` lists one joint
    action tuple (aligned with ``states``) per slot.
    """
    horizon = config.safety_horizon if horizon is None else horizon
    if len(states) > ORACLE_MAX_VEHICLES or config.length_L > ORACLE_MAX_LENGTH:
        raise ValueError("instance too large for the exhaustive oracle")
    if horizon > config.safety_horizon:
        raise ValueError("horizon exceeds the configured safety horizon")
    L = config.length_L
    k = config.collision_cost_k
    n = len(states)
    signs = [s.direction.sign for s in states]

    def remaining(c, sign):
        return L - c if sign > 0 else c

    start_pos = tuple(None if s.exited else s.coord(L) for s in states)
    start_el = tuple(s.elapsed_time for s in states)

    def bound(pos, el):
        return max(e + (0 if c is None else remaining(c, sg)) for c, e, sg in zip(pos, el, signs))

    counter = itertools.count()
    heap = [(bound(start_pos, start_el), 0, next(counter), start_pos, start_el, None)]
    fronts: dict[tuple, list[tuple]] = {}
    choices = (int(Action.FORWARD), int(Action.WAIT), int(Action.BACKWARD))

    while heap:
        lb, t, _, pos, el, parent = heapq.heappop(heap)
        if all(c is None for c in pos):
            schedule = []
            node = parent
            while node is not None:
                node, joint = node
                schedule.append(joint)
            schedule.reverse()
            return max(el), schedule
        if t >= horizon:
            continue
        active = [i for i in range(n) if pos[i] is not None]
        coords = [pos[i] for i in active]
        sg = [signs[i] for i in active]
        outcomes = {}
        for acts in itertools.product(choices, repeat=len(active)):
            final, groups = resolve_moves(coords, sg, acts, L)
            hit = set().union(*groups) if groups else set()
            new_pos = list(pos)
            new_el = list(el)
            for j, i in enumerate(active):
                c = final[j]
                new_el[i] = el[i] + 1 + (k if j in hit else 0)
                done = c >= L if sg[j] > 0 else c <= 0
                new_pos[i] = None if done else c
            key = (tuple(new_pos), tuple(new_el))
            if key not in outcomes:
                joint = [int(Action.WAIT)] * n
                for j, i in enumerate(active):
                    joint[i] = acts[j]
                outcomes[key] = tuple(Action(a) for a in joint)
        for (new_pos, new_el), joint in outcomes.items():
            vec = new_el + (t + 1,)
            front = fronts.setdefault(new_pos, [])
            if any(all(a <= b for a, b in zip(f, vec)) for f in front):
                continue
            front[:] = [f for f in front if not all(a <= b for a, b in zip(vec, f))]
            front.append(vec)
            heapq.heappush(heap, (bound(new_pos, new_el), t + 1, next(counter), new_pos, new_el,
                                  (parent, joint)))
    raise RuntimeError("no terminating schedule within the horizon")
