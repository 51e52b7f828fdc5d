"""Episode loop, Monte Carlo replication and Price-of-Anarchy metrics."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Sequence

import numpy as np

from .comms import (CommConfig, Message, TypeAndState, TypeOnly, broadcast_round,
                    sense_all, slot_beacon)
from .model import (Action, AlleyConfig, CollisionEvent, Direction, UtilityParams, VehicleState,
                    VType, apply_actions, make_vehicles)
from .planning import (ORACLE_MAX_LENGTH, ORACLE_MAX_VEHICLES, minmax_oracle,
                       plan_central)
from .strategy import DEFAULT_PRIOR, DEFAULT_RATIONALITY, PolicyKind, Prior, decide

log = logging.getLogger(__name__)

TYPES_STREAM = 1_000_001
COMMS_STREAM = 1_000_002


@dataclass(frozen=True)
class Scenario:
    config: AlleyConfig = field(default_factory=AlleyConfig)
    comm_cfg: CommConfig = field(default_factory=CommConfig)
    utility_params: UtilityParams | None = None
    east_positions: tuple = (0,)
    west_positions: tuple = (0,)
    types: tuple | None = None  # explicit per-vehicle types, east first
    type_prior: float = 0.5  # P(UR) when ``types`` is None
    seed: int = 0
    prior: Prior = DEFAULT_PRIOR
    rationality: float = DEFAULT_RATIONALITY

    def __post_init__(self):
        object.__setattr__(self, "east_positions", tuple(self.east_positions))
        object.__setattr__(self, "west_positions", tuple(self.west_positions))
        if self.utility_params is None:
            object.__setattr__(self, "utility_params", UtilityParams.for_config(self.config))
        if self.types is not None:
            object.__setattr__(self, "types", tuple(VType(t) for t in self.types))
        self.validate()

    @property
    def n_vehicles(self) -> int:
        return len(self.east_positions) + len(self.west_positions)

    def validate(self) -> None:
        L = self.config.length_L
        if not self.east_positions and not self.west_positions:
            raise ValueError("scenario has no vehicles")
        for x in self.east_positions + self.west_positions:
            if not 0 <= x < L:
                raise ValueError(f"initial passed distance {x} outside [0, {L})")
        east = [x for x in self.east_positions]
        west = [L - x for x in self.west_positions]
        if len(set(east)) != len(east) or len(set(west)) != len(west) or set(east) & set(west):
            raise ValueError("initial coordinates must be distinct")
        if east and west and max(east) > min(west):
            raise ValueError("opposing groups cannot start past each other")
        if self.types is not None and len(self.types) != self.n_vehicles:
            raise ValueError("types must list one entry per vehicle")
        if not 0.0 <= self.type_prior <= 1.0:
            raise ValueError("type_prior must lie in [0, 1]")

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, seed=seed)

    def draw_types(self) -> tuple:
        if self.types is not None:
            return self.types
        rng = np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(TYPES_STREAM,)))
        return tuple(VType.UR if u < self.type_prior else VType.SR
                     for u in rng.random(self.n_vehicles))

    def initial_states(self) -> list[VehicleState]:
        return make_vehicles(self.east_positions, self.west_positions, self.draw_types())


@dataclass(frozen=True)
class EpisodeResult:
    elapsed_times: tuple
    slots_used: int
    collisions: tuple
    terminated: bool
    vehicles: tuple = ()  # final states

    @property
    def max_elapsed(self) -> int:
        return max(self.elapsed_times)

    @property
    def mean_elapsed(self) -> float:
        return float(np.mean(self.elapsed_times))


@dataclass(frozen=True)
class ExperimentStats:
    policy: PolicyKind
    episodes: int
    mean_elapsed_per_vehicle: float
    max_elapsed_mean: float
    non_termination_rate: float
    poa: float | None = None
    per_episode_mean: tuple = ()  # every episode, horizon values included
    per_episode_max: tuple = ()


def vehicle_rng(seed: int, vehicle_id: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(vehicle_id,)))


def _messages(policy: PolicyKind, states, sensed, seq: dict, slot: int) -> list[Message]:
    out = []
    for s in states:
        if s.exited or not sensed[s.id]:
            continue
        if policy is PolicyKind.GAME_COMM_TYPES:
            payload = TypeOnly(s.vtype)
        else:
            payload = TypeAndState(s.vtype, s.passed_distance, s.elapsed_time, s.direction)
        n = seq.get(s.id, 0)
        seq[s.id] = n + 1
        out.append(Message(s.id, n, slot, payload))
    return out


def run_episode(scenario: Scenario, policy: PolicyKind, check_invariants: bool = False,
                trace: list | None = None) -> EpisodeResult:
    """Play one episode; ``trace``, if given, collects (slot, actions, states after)."""
    config = scenario.config
    params = scenario.utility_params
    states = scenario.initial_states()
    rngs = {s.id: vehicle_rng(scenario.seed, s.id) for s in states}
    comm_rng = np.random.default_rng(np.random.SeedSequence(scenario.seed, spawn_key=(COMMS_STREAM,)))
    seq: dict[int, int] = {}
    events: list[CollisionEvent] = []
    slot = 0
    live = len(states)
    uses_comms = policy.uses_comms
    central = policy is PolicyKind.CENTRAL_AUTHORITY
    while live and slot < config.safety_horizon:
        marker = slot_beacon(slot)
        if central:
            actions = plan_central(states, config)
        else:
            sensed = sense_all(states, config)
            inbox: dict[int, list] = {}
            if uses_comms:
                outgoing = _messages(policy, states, sensed, seq, marker)
                if outgoing:
                    inbox = broadcast_round(outgoing, states, scenario.comm_cfg, config, comm_rng)
            actions = [Action.WAIT if s.exited else
                       decide(policy, s, sensed[s.id], inbox.get(s.id, ()), rngs[s.id],
                              params, config, scenario.prior, scenario.rationality)
                       for s in states]
        states, ev = apply_actions(states, actions, config, slot)
        if ev:
            events.extend(ev)
        if trace is not None:
            trace.append((slot, tuple(actions), tuple(states)))
        slot += 1
        live = sum(not s.exited for s in states)
        if check_invariants:
            check_state_invariants(states, config)
    return EpisodeResult(tuple(s.elapsed_time for s in states), slot, tuple(events),
                         all(s.exited for s in states), tuple(states))


def check_state_invariants(states: Sequence[VehicleState], config: AlleyConfig) -> None:
    L = config.length_L
    cells = set()
    for s in states:
        if s.exited:
            continue
        c = s.coord(L)
        if not 0 <= c <= L:
            raise AssertionError(f"vehicle {s.id} at coordinate {c} outside [0, {L}]")
        if 0 < c < L:
            if c in cells:
                raise AssertionError(f"cell {c} shared by two vehicles")
            cells.add(c)


def run_experiment(template: Scenario, policy: PolicyKind, replications: int,
                   base_seed: int = 0, episodes: list | None = None) -> ExperimentStats:
    if replications < 1:
        raise ValueError("replications must be >= 1")
    results = [run_episode(template.with_seed(base_seed + r), policy) for r in range(replications)]
    if episodes is not None:
        episodes.extend(results)
    return summarize(policy, results)


def summarize(policy: PolicyKind, results: Sequence[EpisodeResult]) -> ExperimentStats:
    done = [r for r in results if r.terminated]
    mean_elapsed = float(np.mean([r.mean_elapsed for r in done])) if done else math.nan
    max_mean = float(np.mean([r.max_elapsed for r in done])) if done else math.nan
    return ExperimentStats(policy, len(results), mean_elapsed, max_mean,
                           1.0 - len(done) / len(results),
                           per_episode_mean=tuple(r.mean_elapsed for r in results),
                           per_episode_max=tuple(r.max_elapsed for r in results))


@lru_cache(maxsize=4096)
def _optimum_cached(config: AlleyConfig, east: tuple, west: tuple, types: tuple):
    states = make_vehicles(east, west, types)
    if len(states) <= ORACLE_MAX_VEHICLES and config.length_L <= ORACLE_MAX_LENGTH:
        return minmax_oracle(states, config)[0], True
    central = Scenario(config=config, east_positions=east, west_positions=west, types=types)
    res = run_episode(central, PolicyKind.CENTRAL_AUTHORITY)
    return res.max_elapsed, False


def social_optimum(scenario: Scenario) -> tuple[int, bool]:
    """Min-max optimum for the scenario's initial state and whether it is exact."""
    # types never change the dynamics, so the optimum ignores them
    n = scenario.n_vehicles
    return _optimum_cached(scenario.config, scenario.east_positions, scenario.west_positions,
                           (VType.SR,) * n)


@dataclass(frozen=True)
class PoAResult:
    value: float
    exact_optimum: bool
    horizon_hits: int


def price_of_anarchy(stats: ExperimentStats | None, template: Scenario, replications: int,
                     base_seed: int = 0, policy: PolicyKind | None = None) -> PoAResult:
    """Mean over episodes of max elapsed under the policy divided by the optimum.

    Episodes cut by the safety horizon contribute their elapsed times at the
    cut, which underestimates their true cost; they are counted in
    ``horizon_hits``.
    """
    if stats is None or len(stats.per_episode_max) != replications:
        if policy is None:
            policy = stats.policy
        stats = run_experiment(template, policy, replications, base_seed)
    opt, exact = social_optimum(template)
    if opt <= 0:
        raise ZeroDivisionError("optimum must be positive")
    maxes = np.asarray(stats.per_episode_max, dtype=float)
    hits = int(round(stats.non_termination_rate * stats.episodes))
    return PoAResult(float(np.mean(maxes / opt)), exact, hits)


def consecutive_scenario(n_per_side: int, config: AlleyConfig, **kwargs) -> Scenario:
    """Opposing groups queued at their entrances in consecutive cells."""
    return Scenario(config=config, east_positions=tuple(range(n_per_side)),
                    west_positions=tuple(range(n_per_side)), **kwargs)


@dataclass(frozen=True)
class Reduction:
    percent: float
    ci_low: float
    ci_high: float


def paired_reduction(baseline: Sequence[float], other: Sequence[float], z: float = 1.96) -> Reduction:
    """Percent reduction of ``other`` against ``baseline`` on paired episodes.

    The interval is a normal approximation on the per-episode differences,
    scaled by the baseline mean.
    """
    base = np.asarray(baseline, dtype=float)
    diff = base - np.asarray(other, dtype=float)
    if base.shape != diff.shape or base.size == 0:
        raise ValueError("paired samples must be non-empty and of equal length")
    scale = 100.0 / base.mean()
    half = z * diff.std(ddof=1) / math.sqrt(diff.size) if diff.size > 1 else 0.0
    mean = diff.mean()
    return Reduction(float(mean * scale), float((mean - half) * scale), float((mean + half) * scale))
