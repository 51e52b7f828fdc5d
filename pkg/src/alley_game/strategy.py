"""Decision policies: random baseline, best responses and equilibrium play."""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from . import equilibrium
from .comms import Message, SensingResult, TypeAndState, TypeOnly
from .model import (ACTION_ORDER, Action, ActionEvaluation, AlleyConfig, Direction,
                    UtilityParams, VehicleState, VType, evaluate,
                    expected_elapsed_time_two_vehicle, utility)

NORM_TOL = 1e-9


class PolicyKind(enum.Enum):
    RANDOM = "Random"
    GAME_NO_COMM = "GameNoComm"
    GAME_COMM_TYPES = "GameCommTypes"
    GAME_COMM_TYPES_STATE = "GameCommTypesState"
    CENTRAL_AUTHORITY = "CentralAuthority"

    @classmethod
    def parse(cls, name: str) -> "PolicyKind":
        for p in cls:
            if name in (p.value, p.name):
                return p
        raise ValueError(f"unknown policy {name!r}")

    @property
    def uses_comms(self) -> bool:
        return self in (PolicyKind.GAME_COMM_TYPES, PolicyKind.GAME_COMM_TYPES_STATE)


@dataclass(frozen=True)
class MixedStrategy:
    p_forward: float
    p_wait: float
    p_backward: float

    def __post_init__(self):
        probs = (self.p_forward, self.p_wait, self.p_backward)
        if any(p < -NORM_TOL or p > 1 + NORM_TOL for p in probs):
            raise ValueError(f"probabilities out of range: {probs}")
        if abs(sum(probs) - 1.0) > NORM_TOL:
            raise ValueError(f"probabilities must sum to 1, got {sum(probs)}")
        # sampling table: the pure action if any, else cumulative weights
        pure = next((a for a, p in zip(ACTION_ORDER, probs) if p >= 1.0 - NORM_TOL), None)
        object.__setattr__(self, "_pure", pure)
        object.__setattr__(self, "_cum", tuple(itertools.accumulate(probs)))

    @classmethod
    def pure(cls, action: Action) -> "MixedStrategy":
        return cls.from_vector([1.0 if a is action else 0.0 for a in ACTION_ORDER])

    @classmethod
    def from_vector(cls, vec) -> "MixedStrategy":
        v = np.clip(np.asarray(vec, dtype=float), 0.0, None)
        v = v / v.sum()
        return cls(float(v[0]), float(v[1]), float(v[2]))

    def vector(self) -> np.ndarray:
        return np.array([self.p_forward, self.p_wait, self.p_backward])

    def prob(self, action: Action) -> float:
        return float(self.vector()[ACTION_ORDER.index(Action(action))])

    @property
    def is_pure(self) -> bool:
        return bool(np.max(self.vector()) >= 1.0 - NORM_TOL)

    def sample(self, rng: np.random.Generator) -> Action:
        """Draw an action; pure strategies consume no random numbers."""
        if self._pure is not None:
            return self._pure
        u = rng.random()
        for a, c in zip(ACTION_ORDER, self._cum):
            if u < c:
                return a
        return ACTION_ORDER[-1]


UNIFORM = MixedStrategy(1 / 3, 1 / 3, 1 / 3)


@dataclass(frozen=True)
class NeighborBelief:
    """Belief about one other vehicle: type distribution and per-type action distribution."""

    vehicle: VehicleState
    p_type: Mapping[VType, float]
    actions: Mapping[VType, MixedStrategy]

    def __post_init__(self):
        if abs(sum(self.p_type.values()) - 1.0) > NORM_TOL:
            raise ValueError("type distribution is not normalised")
        if any(p < -NORM_TOL for p in self.p_type.values()):
            raise ValueError("negative type probability")

    def outcomes(self):
        """(probability, type, action) triples with non-zero probability."""
        for th, pt in self.p_type.items():
            if pt <= 0:
                continue
            for a in ACTION_ORDER:
                pa = self.actions[th].prob(a)
                if pa > 0:
                    yield pt * pa, th, a


@dataclass(frozen=True)
class BeliefProfile:
    neighbors: tuple = ()


@dataclass(frozen=True)
class Prior:
    """Default beliefs used when nothing better is known."""

    p_UR: float = 0.5
    ur_actions: MixedStrategy = MixedStrategy(0.2, 0.3, 0.5)
    sr_actions: MixedStrategy = MixedStrategy(0.7, 0.2, 0.1)

    def __post_init__(self):
        if not 0.0 <= self.p_UR <= 1.0:
            raise ValueError("p_UR must lie in [0, 1]")

    def type_dist(self, known: VType | None = None) -> dict:
        if known is not None:
            return {VType.UR: 1.0 if known is VType.UR else 0.0,
                    VType.SR: 1.0 if known is VType.SR else 0.0}
        return {VType.UR: self.p_UR, VType.SR: 1.0 - self.p_UR}

    def belief(self, vehicle: VehicleState, known: VType | None = None) -> NeighborBelief:
        return NeighborBelief(vehicle, self.type_dist(known),
                              {VType.UR: self.ur_actions, VType.SR: self.sr_actions})


DEFAULT_PRIOR = Prior()
# Logit precision for play without communication (1 / utility unit).
DEFAULT_RATIONALITY = 0.5


def best_response_pure(evals: Sequence[ActionEvaluation]) -> Action:
    by_action = {Action(e.action): e for e in evals}
    if set(by_action) != set(ACTION_ORDER) or len(evals) != 3:
        raise ValueError("evaluations must cover each action exactly once")
    best = max(by_action[a].utility for a in ACTION_ORDER)
    for a in ACTION_ORDER:
        if by_action[a].utility >= best:
            return a
    raise AssertionError("unreachable")


def best_response_set(evals: Sequence[ActionEvaluation], tol: float = 1e-9) -> MixedStrategy:
    """Uniform mixture over every action attaining the maximum utility."""
    best = max(e.utility for e in evals)
    hits = {Action(e.action) for e in evals if e.utility >= best - tol}
    return MixedStrategy.from_vector([1.0 if a in hits else 0.0 for a in ACTION_ORDER])


def evaluate_two_vehicle(me: VehicleState, opp: VehicleState, params: UtilityParams,
                         config: AlleyConfig) -> list[ActionEvaluation]:
    """Evaluations of each own action, ignoring collisions."""
    return [evaluate(a, expected_elapsed_time_two_vehicle(me, opp, a, config), me.vtype, params)
            for a in ACTION_ORDER]


def gap(me: VehicleState, opp: VehicleState, config: AlleyConfig) -> int:
    return abs(me.coord(config.length_L) - opp.coord(config.length_L))


def collides(a_me: Action, a_opp: Action, distance: int) -> bool:
    """Whether a joint action of two facing vehicles ends in contention."""
    if a_me is Action.FORWARD and a_opp is Action.FORWARD:
        return distance <= 2
    if distance == 1 and Action.FORWARD in (a_me, a_opp) and Action.WAIT in (a_me, a_opp):
        return True
    return False


def two_vehicle_times(me: VehicleState, opp: VehicleState, config: AlleyConfig,
                      contention: bool = True) -> np.ndarray:
    """3x3 matrix of ``me``'s expected elapsed time per (own, opponent) action.

    A contended cell adds ``k`` to the own action's estimate when
    ``contention`` is off. With contention on, the clash leaves both
    vehicles where they are, which is a wait: the cell is charged the wait
    estimate plus ``k``.
    """
    d = gap(me, opp, config)
    k = config.collision_cost_k
    base = [expected_elapsed_time_two_vehicle(me, opp, a, config) for a in ACTION_ORDER]
    clash = k + base[ACTION_ORDER.index(Action.WAIT)]
    F = np.empty((3, 3))
    for i, a in enumerate(ACTION_ORDER):
        for j, b in enumerate(ACTION_ORDER):
            if not collides(a, b, d):
                F[i, j] = base[i]
            else:
                F[i, j] = clash if contention else base[i] + k
    return F


def utility_matrix(times: np.ndarray, vtype: VType, params: UtilityParams) -> np.ndarray:
    """Vectorised ``utility`` over an array of expected elapsed times."""
    over = np.asarray(times, dtype=float) - params.threshold(vtype)
    return np.where(over <= 0, params.plateau_payoff,
                    np.maximum(0.0, params.plateau_payoff - params.slope * over))


def _utilities(times: np.ndarray, type_dist, params: UtilityParams):
    out = np.zeros(np.shape(times))
    for th, p in type_dist:
        if p > 0:
            out += p * utility_matrix(times, th, params)
    return out


@dataclass(frozen=True, eq=False)
class TwoVehicleGame:
    me: VehicleState
    opp: VehicleState
    times_me: np.ndarray
    times_opp: np.ndarray  # indexed [own action, opponent action] from opp's viewpoint
    A: np.ndarray  # row player (me) payoffs, [me action, opp action]
    B: np.ndarray  # column player (opp) payoffs, [me action, opp action]


def _type_key(opp: VehicleState, opp_types):
    dist = opp_types or {opp.vtype: 1.0}
    return tuple(sorted(((VType(t), float(p)) for t, p in dist.items() if p > 0),
                        key=lambda tp: tp[0].value))


def two_vehicle_game(me: VehicleState, opp: VehicleState, params: UtilityParams,
                     config: AlleyConfig, opp_types: Mapping[VType, float] | None = None,
                     contention: bool = True) -> TwoVehicleGame:
    """Bimatrix game between two facing vehicles.

    ``opp_types`` replaces the opponent's own type by a distribution; its
    payoffs are then the expectation over that distribution.
    """
    if me.direction is opp.direction:
        raise ValueError("two-vehicle game needs opposing vehicles")
    t_me = two_vehicle_times(me, opp, config, contention)
    t_opp = two_vehicle_times(opp, me, config, contention)
    A = _utilities(t_me, ((me.vtype, 1.0),), params)
    B = _utilities(t_opp, _type_key(opp, opp_types), params).T
    return TwoVehicleGame(me, opp, t_me, t_opp, A, B)


def _priority_key(me: VehicleState, opp: VehicleState) -> bool:
    """True when ``me`` is the canonical leader of the pair."""
    if me.passed_distance != opp.passed_distance:
        return me.passed_distance > opp.passed_distance
    return me.direction is Direction.EAST


def _shifted(m: np.ndarray) -> tuple:
    # equilibria and their ranking are unchanged by a per-player constant
    return tuple(np.round(np.asarray(m, dtype=float) - np.min(m), 9).ravel())


def select_equilibrium(game: TwoVehicleGame, coordinated: bool = True):
    """Pick one equilibrium (p for me, q for opponent).

    Coordinated selection assumes both players know the same game: prefer
    pure equilibria, then maximum total utility, then minimum total
    expected elapsed time, then the pair leader moving forward. The rule is
    symmetric, so both players single out the same profile.

    Uncoordinated selection is used when the opponent's payoffs are only a
    belief and no convention can be relied on: the unique equilibrium if
    there is one, otherwise the most mixed one.
    """
    return _select(_shifted(game.A), _shifted(game.B), _shifted(game.times_me),
                   _shifted(game.times_opp), _priority_key(game.me, game.opp), coordinated)


@lru_cache(maxsize=100_000)
def _select(A, B, times_me, times_opp, leader: bool, coordinated: bool):
    A = np.reshape(A, (3, 3))
    B = np.reshape(B, (3, 3))
    times_me = np.reshape(times_me, (3, 3))
    times_opp = np.reshape(times_opp, (3, 3))
    eqs = equilibrium.support_enumeration(A, B)
    if not eqs:
        raise RuntimeError("support enumeration found no equilibrium")
    rank = {a: r for r, a in enumerate(ACTION_ORDER)}

    def is_pure(p, q):
        return p.max() > 1 - 1e-12 and q.max() > 1 - 1e-12

    def welfare(p, q):
        return float(p @ A @ q + p @ B @ q)

    def total_time(p, q):
        return float(p @ times_me @ q + q @ times_opp @ p)

    def canon(p, q):
        mine, theirs = rank[ACTION_ORDER[int(np.argmax(p))]], rank[ACTION_ORDER[int(np.argmax(q))]]
        return (mine, theirs) if leader else (theirs, mine)

    if coordinated:
        best = min(eqs, key=lambda e: (not is_pure(*e), -round(welfare(*e), 9),
                                       round(total_time(*e), 9), canon(*e)))
    elif len(eqs) == 1:
        best = eqs[0]
    else:
        support = lambda e: int((e[0] > 1e-12).sum() + (e[1] > 1e-12).sum())
        best = min(eqs, key=lambda e: (-support(e), -round(float(e[0] @ A @ e[1]), 9), canon(*e)))
    for v in best:
        v.setflags(write=False)
    return best


def solve_two_vehicle_game(me: VehicleState, opp: VehicleState, params: UtilityParams,
                           config: AlleyConfig, opp_types: Mapping[VType, float] | None = None,
                           coordinated: bool = True, contention: bool = True) -> MixedStrategy:
    """Own equilibrium strategy in the two-vehicle game (see ``select_equilibrium``)."""
    if me.direction is opp.direction:
        raise ValueError("two-vehicle game needs opposing vehicles")
    key = _type_key(opp, opp_types)
    if len(key) > 1:
        # a type mixture makes every threshold matter; keep the exact state
        opp_key = opp
    else:
        opp_key = _canonical(replace(opp, vtype=key[0][0]), params, config)
    return _solve(_canonical(me, params, config), opp_key, params, config, key,
                  coordinated, contention)


def _canonical(v: VehicleState, params: UtilityParams, config: AlleyConfig) -> VehicleState:
    """``v`` with an equivalent elapsed time, for cache keys.

    Once every estimate of ``v`` sits on the linear part of its utility, a
    later elapsed time only lowers all its payoffs by the same constant,
    which changes neither logit choice nor any equilibrium.
    """
    thr = params.threshold(v.vtype)
    lo = int(np.ceil(thr))
    top = thr + params.plateau_payoff / params.slope
    worst = 2 * config.length_L + config.collision_cost_k + 1  # largest f - t_e
    if v.elapsed_time > lo and v.elapsed_time + worst <= top:
        return VehicleState(v.id, v.direction, v.passed_distance, lo, v.vtype, v.exited)
    return v


@lru_cache(maxsize=200_000)
def _solve(me, opp, params, config, type_key, coordinated, contention) -> MixedStrategy:
    game = two_vehicle_game(me, opp, params, config, dict(type_key), contention)
    p, _ = select_equilibrium(game, coordinated)
    return MixedStrategy.from_vector(p)


def expected_utilities(me: VehicleState, beliefs: BeliefProfile, params: UtilityParams,
                       config: AlleyConfig, contention: bool = True) -> list[ActionEvaluation]:
    """Expected utility of each own action under independent neighbour beliefs.

    Opposing neighbours contribute through the two-vehicle formulas against
    the nearest of them; a same-direction neighbour directly behind turns a
    backward move into a wait unless it backs too, and one directly ahead
    turns a forward move into a wait unless it moves forward too. Other
    neighbours do not enter ``f``, so summing over their outcomes leaves the
    expectation unchanged and they are marginalised out.
    """
    L = config.length_L
    here = me.coord(L)
    sign = me.direction.sign
    opp = [b for b in beliefs.neighbors if b.vehicle.direction is not me.direction]
    same = [b for b in beliefs.neighbors if b.vehicle.direction is me.direction]
    if not opp:
        raise ValueError("expected utilities need at least one opposing neighbour")
    nearest_b = min(opp, key=lambda b: (abs(b.vehicle.coord(L) - here), b.vehicle.id))
    ahead = [b for b in same if (b.vehicle.coord(L) - here) * sign == 1][:1]
    behind = [b for b in same if (b.vehicle.coord(L) - here) * sign == -1][:1]
    nearest = nearest_b.vehicle
    d = abs(nearest.coord(L) - here)
    times = two_vehicle_times(me, nearest, config, contention)

    def marginal(b):
        out = dict.fromkeys(ACTION_ORDER, 0.0)
        for w, _, a in b.outcomes():
            out[a] += w
        return out

    p_opp = marginal(nearest_b)
    p_ahead_fwd = marginal(ahead[0])[Action.FORWARD] if ahead else 1.0
    p_behind_back = marginal(behind[0])[Action.BACKWARD] if behind else 1.0
    evals = []
    for a in ACTION_ORDER:
        # realised own move: blocked moves turn into a wait
        if a is Action.FORWARD:
            realised = ((Action.FORWARD, p_ahead_fwd), (Action.WAIT, 1.0 - p_ahead_fwd))
        elif a is Action.BACKWARD:
            realised = ((Action.BACKWARD, p_behind_back), (Action.WAIT, 1.0 - p_behind_back))
        else:
            realised = ((Action.WAIT, 1.0),)
        f_exp = u_exp = 0.0
        for r, pr in realised:
            if pr <= 0:
                continue
            i = ACTION_ORDER.index(r)
            for j, b in enumerate(ACTION_ORDER):
                w = pr * p_opp[b]
                if w <= 0:
                    continue
                f = float(times[i, j])
                f_exp += w * f
                u_exp += w * utility(me.vtype, f, params)
        evals.append(ActionEvaluation(a, f_exp, u_exp))
    return evals


def best_response_bayes(me: VehicleState, beliefs: BeliefProfile, params: UtilityParams,
                        config: AlleyConfig, contention: bool = True) -> Action:
    return best_response_pure(expected_utilities(me, beliefs, params, config, contention))


def logit_response(evals: Sequence[ActionEvaluation], rationality: float) -> MixedStrategy:
    """Choice probabilities proportional to ``exp(rationality * utility)``."""
    if rationality < 0:
        raise ValueError("rationality must be >= 0")
    u = np.array([next(e.utility for e in evals if e.action is a) for a in ACTION_ORDER])
    w = np.exp(rationality * (u - u.max()))
    return MixedStrategy.from_vector(w)


@dataclass(frozen=True)
class Known:
    """What a deciding vehicle knows about another one."""

    vehicle: VehicleState  # estimate; elapsed_time is a guess unless shared
    vtype: VType | None
    exact_state: bool


def observe(me: VehicleState, sensed: SensingResult, inbox: Sequence[Message],
            policy: PolicyKind, config: AlleyConfig) -> dict[int, Known]:
    L = config.length_L
    here = me.coord(L)
    sign = me.direction.sign
    types: dict[int, VType] = {}
    shared: dict[int, TypeAndState] = {}
    if policy.uses_comms:
        for m in inbox:
            types[m.source_id] = m.payload.vtype
            if policy is PolicyKind.GAME_COMM_TYPES_STATE and isinstance(m.payload, TypeAndState):
                shared[m.source_id] = m.payload
    view: dict[int, Known] = {}
    for d in sensed.detected:
        c = here + sign * d.distance if d.side == "ahead" else here - sign * d.distance
        x = c if d.direction is Direction.EAST else L - c
        est = VehicleState(d.vehicle_id, d.direction, x, me.elapsed_time,
                           types.get(d.vehicle_id, VType.SR))
        view[d.vehicle_id] = Known(est, types.get(d.vehicle_id), False)
    for vid, st in shared.items():
        est = VehicleState(vid, st.direction, st.passed_distance, st.elapsed_time, st.vtype)
        view[vid] = Known(est, st.vtype, True)
    return view


def _ahead_distance(me: VehicleState, other: VehicleState, config: AlleyConfig) -> int:
    L = config.length_L
    return (other.coord(L) - me.coord(L)) * me.direction.sign


NOCOMM_CONTENTION = True


@lru_cache(maxsize=200_000)
def _nocomm_strategy(me, opponent, ahead, behind, params, config, prior, rationality):
    # only the nearest opponent and the adjacent mates enter f
    beliefs = BeliefProfile(tuple(prior.belief(v) for v in (opponent, ahead, behind) if v is not None))
    evals = expected_utilities(me, beliefs, params, config, contention=NOCOMM_CONTENTION)
    return logit_response(evals, rationality)


def _follow(me: VehicleState, view: Mapping[int, Known], prior: Prior,
            config: AlleyConfig) -> MixedStrategy:
    """Play for a vehicle that sees no opponent ahead.

    With a same-direction vehicle directly ahead, the follower mirrors its
    belief about that vehicle's move, so a platoon whose head retreats is
    not pinned in place by a tail that cannot see the contention.
    """
    for kn in view.values():
        if kn.vehicle.direction is me.direction and _ahead_distance(me, kn.vehicle, config) == 1:
            belief = prior.belief(kn.vehicle, kn.vtype)
            return MixedStrategy.from_vector(
                [sum(w for w, _, b in belief.outcomes() if b is a) for a in ACTION_ORDER])
    return MixedStrategy.pure(Action.FORWARD)


def decide(policy: PolicyKind, me: VehicleState, sensed: SensingResult, inbox: Sequence[Message],
           rng: np.random.Generator, params: UtilityParams, config: AlleyConfig,
           prior: Prior = DEFAULT_PRIOR, rationality: float = DEFAULT_RATIONALITY) -> Action:
    if policy is PolicyKind.CENTRAL_AUTHORITY:
        raise ValueError("the central authority plans jointly; use plan_central")
    if not sensed:
        return Action.FORWARD
    if policy is PolicyKind.RANDOM:
        return ACTION_ORDER[int(rng.integers(3))]
    heard = tuple((m.source_id, m.payload) for m in inbox) if policy.uses_comms else ()
    return _strategy(policy, me, sensed, heard, params, config, prior, rationality).sample(rng)


@lru_cache(maxsize=100_000)
def _strategy(policy, me, sensed, heard, params, config, prior, rationality) -> MixedStrategy:
    view = observe(me, sensed, [Message(src, 0, 0, payload) for src, payload in heard],
                   policy, config)
    opponents = [kn for kn in view.values()
                 if kn.vehicle.direction is not me.direction and _ahead_distance(me, kn.vehicle, config) > 0]
    if not opponents:
        return _follow(me, view, prior, config)
    opponents.sort(key=lambda kn: (_ahead_distance(me, kn.vehicle, config), kn.vehicle.id))
    nearest = opponents[0]
    if policy is PolicyKind.GAME_NO_COMM:
        near = {}
        for kn in view.values():
            if kn.vehicle.direction is me.direction:
                gap_ = _ahead_distance(me, kn.vehicle, config)
                if abs(gap_) == 1:
                    near[gap_] = kn.vehicle
        # only the own elapsed time enters the estimates
        blank = lambda v: None if v is None else VehicleState(v.id, v.direction, v.passed_distance,
                                                              0, v.vtype, v.exited)
        return _nocomm_strategy(_canonical(me, params, config), blank(nearest.vehicle),
                                blank(near.get(1)), blank(near.get(-1)), params, config,
                                prior, rationality)
    # With shared types the pair in front solves a common game; followers copy their leader.
    mates = [kn for kn in view.values() if kn.vehicle.direction is me.direction
             and 0 < _ahead_distance(me, kn.vehicle, config) < _ahead_distance(me, nearest.vehicle, config)]
    actor = me
    if mates:
        leader = max(mates, key=lambda kn: _ahead_distance(me, kn.vehicle, config))
        if leader.vtype is not None:
            actor = replace(leader.vehicle, vtype=leader.vtype)
    if nearest.vtype is None:
        strat = solve_two_vehicle_game(actor, nearest.vehicle, params, config, prior.type_dist(),
                                       coordinated=False)
    else:
        strat = solve_two_vehicle_game(actor, replace(nearest.vehicle, vtype=nearest.vtype),
                                       params, config)
    return strat
