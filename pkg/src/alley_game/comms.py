"""Logical sensing and broadcast messaging between vehicles.

Sensing reveals presence and distance of nearby vehicles. Messages are
flooded over the communication-range graph and deduplicated by
``(source_id, sequence)`` at every receiver.
"""

from __future__ import annotations

import itertools
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .model import AlleyConfig, Direction, VehicleState, VType


@dataclass(frozen=True)
class TypeOnly:
    vtype: VType


@dataclass(frozen=True)
class TypeAndState:
    vtype: VType
    passed_distance: int
    elapsed_time: int
    # Heading lets distant receivers place the sender on the alley.
    direction: Direction


Payload = Union[TypeOnly, TypeAndState]


@dataclass(frozen=True, slots=True)
class Message:
    source_id: int
    sequence: int
    slot: int
    payload: Payload
    hop_count: int = 0

    @property
    def key(self):
        return (self.source_id, self.sequence)


@dataclass(frozen=True, slots=True)
class Detection:
    vehicle_id: int
    distance: int
    side: str  # "ahead" or "behind", relative to the observer's heading
    direction: Direction  # heading of the detected vehicle, visible to the sensor


@dataclass(frozen=True)
class SensingResult:
    detected: tuple = ()

    def __bool__(self):
        return bool(self.detected)

    def ids(self):
        return [d.vehicle_id for d in self.detected]


@dataclass(frozen=True)
class CommConfig:
    loss_probability: float = 0.0
    relay_enabled: bool = True
    max_hops: int = 3

    def __post_init__(self):
        if not 0.0 <= self.loss_probability <= 1.0:
            raise ValueError("loss_probability must lie in [0, 1]")
        if self.max_hops < 1:
            raise ValueError("max_hops must be >= 1")


def sense(me: VehicleState, all_states: Sequence[VehicleState], config: AlleyConfig) -> SensingResult:
    L = config.length_L
    D = config.sensing_range_D
    here = me.coord(L)
    sign = me.direction.sign
    found = []
    for other in all_states:
        if other.exited or other.id == me.id:
            continue
        delta = other.coord(L) - here
        if -D < delta < D:
            side = "ahead" if delta * sign >= 0 else "behind"
            found.append(Detection(other.id, abs(delta), side, other.direction))
    found.sort(key=lambda d: (d.distance, d.vehicle_id))
    return SensingResult(tuple(found))


def sense_all(states: Sequence[VehicleState], config: AlleyConfig) -> dict[int, SensingResult]:
    """``sense`` for every non-exited vehicle, sharing one coordinate pass."""
    L = config.length_L
    key = tuple((s.id, s.coord(L), s.direction) for s in states if not s.exited)
    return _sense_all(key, config.sensing_range_D)


@lru_cache(maxsize=50_000)
def _sense_all(live: tuple, D: int) -> dict[int, SensingResult]:
    # cached and shared: callers must not mutate the returned mapping
    out = {}
    for vid, here, direction in live:
        sign = direction.sign
        found = []
        for oid, c, odir in live:
            delta = c - here
            if oid != vid and -D < delta < D:
                side = "ahead" if delta * sign >= 0 else "behind"
                found.append(Detection(oid, abs(delta), side, odir))
        if len(found) > 1:
            found.sort(key=lambda d: (d.distance, d.vehicle_id))
        out[vid] = SensingResult(tuple(found))
    return out


class SequenceCounter:
    """Per-source monotone sequence numbers."""

    def __init__(self):
        self._next: dict[int, itertools.count] = {}

    def next(self, source_id: int) -> int:
        return next(self._next.setdefault(source_id, itertools.count()))


def broadcast_round(outgoing: Sequence[Message], states: Sequence[VehicleState],
                    comm_cfg: CommConfig, config: AlleyConfig,
                    rng: np.random.Generator) -> dict[int, list[Message]]:
    L = config.length_L
    live = [s for s in states if not s.exited]
    coord = {s.id: s.coord(L) for s in live}
    ids = sorted(coord)
    neighbours = {i: [j for j in ids if j != i and abs(coord[i] - coord[j]) <= config.comm_range]
                  for i in ids}
    inbox: dict[int, list[Message]] = {i: [] for i in ids}
    seen: dict[int, set] = {i: set() for i in ids}
    hops = comm_cfg.max_hops if comm_cfg.relay_enabled else 1
    lossy = comm_cfg.loss_probability > 0.0

    for msg in outgoing:
        src = msg.source_id
        if src not in coord:
            continue
        seen[src].add(msg.key)
        frontier = [src]
        for hop in range(hops):
            nxt = []
            for sender in frontier:
                for r in neighbours[sender]:
                    if msg.key in seen[r]:
                        continue
                    if lossy and rng.random() < comm_cfg.loss_probability:
                        continue
                    seen[r].add(msg.key)
                    inbox[r].append(Message(msg.source_id, msg.sequence, msg.slot, msg.payload, hop))
                    nxt.append(r)
            frontier = nxt
            if not frontier:
                break
    return inbox


@dataclass
class SlotBeacon:
    """Global slot counter shared by every vehicle (perfect synchronisation)."""

    _slot: int = field(default=-1)

    def tick(self) -> int:
        self._slot += 1
        return self._slot

    @property
    def current(self) -> int:
        return self._slot


def slot_beacon(slot: int) -> int:
    return int(slot)
