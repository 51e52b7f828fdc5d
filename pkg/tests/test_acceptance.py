"""Acceptance criteria 1-8, one verdict line each (see the terminal summary)."""

import itertools
import json
import logging
import time

import numpy as np
import pytest

from alley_game.cli import main, summary_sidecar
from alley_game.comms import CommConfig, Message, TypeOnly, broadcast_round
from alley_game.equilibrium import deviation_gain
from alley_game.model import (Action, AlleyConfig, Direction, UtilityParams, VehicleState, VType,
                              expected_elapsed_time_central, make_vehicles)
from alley_game.planning import minmax_oracle
from alley_game.sim import (Scenario, consecutive_scenario, paired_reduction, price_of_anarchy,
                            run_episode, run_experiment)
from alley_game.strategy import (PolicyKind, select_equilibrium, solve_two_vehicle_game,
                                 two_vehicle_game)

log = logging.getLogger(__name__)
E, W = Direction.EAST, Direction.WEST
F, B = Action.FORWARD, Action.BACKWARD

# (elapsed, x_i, x_jstar, L, action) -> value, substituted by hand
CENTRAL_CASES = [
    ((0, 8, 0, 20, F), 12),
    ((0, 8, 19, 20, F), 12),
    ((0, 8, 5, 20, F), 12),
    ((0, 3, 8, 20, B), 32),
    ((5, 0, 0, 20, B), 45),
    ((0, 0, 0, 20, F), 20),
    ((3, 19, 0, 20, F), 4),
    ((0, 19, 0, 20, B), 40),
    ((10, 10, 10, 20, B), 40),
    ((0, 0, 19, 20, B), 21),
    ((7, 4, 2, 8, B), 21),
    ((7, 4, 2, 8, F), 11),
    ((0, 1, 1, 4, B), 7),
    ((0, 1, 1, 4, F), 3),
    ((2, 0, 3, 6, B), 11),
    ((12, 5, 0, 6, F), 13),
    ((1, 1, 5, 6, B), 8),
    ((0, 0, 0, 2, B), 4),
    ((0, 1, 0, 2, F), 1),
    ((100, 7, 3, 10, B), 117),
    ((4, 2, 9, 10, B), 15),
    ((0, 9, 9, 10, B), 11),
    ((0, 5, 5, 10, B), 15),
]

REFERENCE_REDUCTIONS = (37.8, 54.0, 62.4)


def test_criterion_1_central_formula(verdict):
    bad = []
    for (t, x, xj, L, a), want in CENTRAL_CASES:
        for d in Direction:
            got = expected_elapsed_time_central(VehicleState(0, d, x, t), xj, a,
                                                AlleyConfig(length_L=L))
            if got != want:
                bad.append(((t, x, xj, L, a.name, d.value), got, want))
    cfg = AlleyConfig(length_L=10)
    forward = {expected_elapsed_time_central(VehicleState(0, E, 3, 2), xj, F, cfg) for xj in range(10)}
    if forward != {9}:
        bad.append(("independence of x_jstar", forward, {9}))
    n = len(CENTRAL_CASES) + 1
    verdict(1, not bad and n >= 20, f"{n} cases, {len(bad)} mismatches")
    assert not bad and n >= 20


def _all_instances(max_L=6, per_side=2):
    for L in range(2, max_L + 1):
        for ne, nw in itertools.product(range(per_side + 1), repeat=2):
            if ne + nw == 0:
                continue
            for cells in itertools.combinations(range(L + 1), ne + nw):
                east, west = cells[:ne], tuple(L - c for c in cells[ne:])
                if all(x < L for x in east + west):
                    yield L, east, west


def test_criterion_2_oracle_equivalence(verdict):
    start = time.perf_counter()
    total = 0
    discrepancies = []
    for L, east, west in _all_instances():
        for k in (0, 5, 10):
            cfg = AlleyConfig(length_L=L, collision_cost_k=k)
            res = run_episode(Scenario(config=cfg, east_positions=east, west_positions=west),
                              PolicyKind.CENTRAL_AUTHORITY)
            value, _ = minmax_oracle(make_vehicles(east, west), cfg)
            total += 1
            if res.max_elapsed != value:
                discrepancies.append((L, k, east, west, res.max_elapsed, value))
                log.warning("central %s vs optimum %s at L=%s k=%s east=%s west=%s",
                            res.max_elapsed, value, L, k, east, west)
    elapsed = time.perf_counter() - start
    ok = not discrepancies and elapsed < 300
    verdict(2, ok, f"{total} instances, {len(discrepancies)} discrepancies, {elapsed:.1f}s")
    assert ok


def _random_pair(rng):
    L = int(rng.integers(2, 25))
    cfg = AlleyConfig(length_L=L, collision_cost_k=int(rng.integers(0, 16)))
    ce = int(rng.integers(0, L))
    cw = int(rng.integers(ce + 1, L + 1))
    t_e, t_w = (int(v) for v in rng.integers(0, 3 * L, 2))
    me = VehicleState(0, E, ce, t_e, VType.UR if rng.random() < 0.5 else VType.SR)
    opp = VehicleState(1, W, L - cw, t_w, VType.UR if rng.random() < 0.5 else VType.SR)
    if rng.random() < 0.5:
        params = UtilityParams.for_config(cfg)
    else:
        lo, hi = sorted(rng.uniform(0, 3 * L, 2))
        params = UtilityParams(float(rng.uniform(1, 50)), float(hi), float(lo),
                               float(rng.uniform(0.2, 3)))
    return me, opp, params, cfg


def test_criterion_3_equilibrium_verification(verdict):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(1000):
        me, opp, params, cfg = _random_pair(rng)
        p = solve_two_vehicle_game(me, opp, params, cfg)
        q = solve_two_vehicle_game(opp, me, params, cfg)
        g = two_vehicle_game(me, opp, params, cfg)
        worst = max(worst, deviation_gain(g.A, g.B, p.vector(), q.vector()))
        # the same instance with the opponent's type known only as a mixture
        mix = {VType.UR: float(rng.uniform(0.05, 0.95))}
        mix[VType.SR] = 1 - mix[VType.UR]
        p_mix = solve_two_vehicle_game(me, opp, params, cfg, mix, coordinated=False)
        gm = two_vehicle_game(me, opp, params, cfg, mix)
        p_sel, q_sel = select_equilibrium(gm, coordinated=False)
        assert np.allclose(p_mix.vector(), p_sel)
        worst = max(worst, deviation_gain(gm.A, gm.B, p_sel, q_sel))
    verdict(3, worst <= 1e-9, f"1000 instances (x2 type settings), max deviation gain {worst:.2e}")
    assert worst <= 1e-9


def _paired_gap(a, b, z=1.96):
    d = np.asarray(a, float) - np.asarray(b, float)
    half = z * d.std(ddof=1) / np.sqrt(d.size)
    return d.mean() - half, d.mean() + half


def test_criterion_4_fig5_ordering(verdict):
    episodes = 10_000
    sc = consecutive_scenario(1, AlleyConfig(length_L=20, collision_cost_k=10))
    order = (PolicyKind.RANDOM, PolicyKind.GAME_NO_COMM, PolicyKind.GAME_COMM_TYPES,
             PolicyKind.GAME_COMM_TYPES_STATE)
    start = time.perf_counter()
    per = {p: run_experiment(sc, p, episodes).per_episode_mean for p in order}
    elapsed = time.perf_counter() - start
    means = {p: float(np.mean(v)) for p, v in per.items()}
    rnd, none, types, state = (means[p] for p in order)
    reductions = [paired_reduction(per[PolicyKind.RANDOM], per[p]) for p in order[1:]]
    gaps = [_paired_gap(per[a], per[b]) for a, b in zip(order, order[1:3])]
    ok = (rnd > none > types >= state
          and all(r.ci_low > 0 for r in reductions)
          and all(lo > 0 for lo, _ in gaps)
          and elapsed < 120)
    realised = "/".join(f"{r.percent:.1f}" for r in reductions)
    reference = "/".join(f"{v:.1f}" for v in REFERENCE_REDUCTIONS)
    verdict(4, ok, f"means {rnd:.1f} > {none:.1f} > {types:.1f} >= {state:.1f}; "
                   f"reductions {realised}% (reference {reference}%); {elapsed:.1f}s")
    assert ok


def test_criterion_5_fig6_poa(verdict):
    episodes = 1000
    cfg = AlleyConfig(length_L=8, collision_cost_k=10)
    poa = {}
    for n in range(1, 5):
        sc = consecutive_scenario(n, cfg)
        for p in (PolicyKind.GAME_NO_COMM, PolicyKind.GAME_COMM_TYPES, PolicyKind.CENTRAL_AUTHORITY):
            poa[n, p] = price_of_anarchy(None, sc, episodes, policy=p)
    none = [poa[n, PolicyKind.GAME_NO_COMM].value for n in range(1, 5)]
    types = [poa[n, PolicyKind.GAME_COMM_TYPES].value for n in range(1, 5)]
    central_exact = [poa[n, PolicyKind.CENTRAL_AUTHORITY] for n in range(1, 5)
                     if poa[n, PolicyKind.CENTRAL_AUTHORITY].exact_optimum]
    checks = {
        "NoComm non-decreasing": all(a <= b for a, b in zip(none, none[1:])),
        "NoComm > CommTypes": all(a > b for a, b in zip(none, types)),
        "Central = 1": bool(central_exact) and all(abs(r.value - 1.0) <= 1e-9 for r in central_exact),
        "CommTypes <= NoComm at <= 4 vehicles": all(types[n - 1] <= none[n - 1] for n in (1, 2)),
    }
    ok = all(checks.values())
    table = " ".join(f"n={n}:{a:.2f}/{b:.2f}" for n, a, b in zip(range(1, 5), none, types))
    failed = [k for k, v in checks.items() if not v]
    verdict(5, ok, f"PoA NoComm/CommTypes {table}; central exact at {len(central_exact)} points"
                   + (f"; failed: {failed}" if failed else ""))
    assert ok


def test_criterion_6_determinism(verdict, tmp_path):
    conf = tmp_path / "c.toml"
    conf.write_text("[scenario]\nlength_L = 10\neast = [0, 1]\nwest = [0]\nseed = 99\n"
                    "[comms]\nloss_probability = 0.2\n"
                    "[run]\nreplications = 60\n")
    files = {}
    for tag, jobs in (("serial", "1"), ("again", "1"), ("parallel", "3")):
        out = tmp_path / tag / "r.csv"
        assert main(["run", "--config", str(conf), "--out", str(out), "--jobs", jobs]) == 0
        summary = json.loads(open(summary_sidecar(str(out))).read())["summary"]
        files[tag] = (out.read_bytes(), json.dumps(summary).encode())
    for tag, jobs in (("f6a", "1"), ("f6b", "2")):
        out = tmp_path / f"{tag}.csv"
        assert main(["preset", "fig6", "--max-vehicles", "2", "--replications", "30",
                     "--seed", "7", "--out", str(out), "--jobs", jobs]) == 0
        files[tag] = (out.read_bytes(), b"")
    ok = files["serial"] == files["again"] == files["parallel"] and files["f6a"] == files["f6b"]
    verdict(6, ok, "run (serial, repeat, 3 jobs) and preset fig6 (1 and 2 jobs) byte-identical")
    assert ok


def _bfs(coords, R, src):
    dist = {src: 0}
    frontier = [src]
    while frontier:
        nxt = []
        for u in frontier:
            for v in coords:
                if v not in dist and abs(coords[u] - coords[v]) <= R:
                    dist[v] = dist[u] + 1
                    nxt.append(v)
        frontier = nxt
    return dist


def test_criterion_7_comms(verdict):
    rng = np.random.default_rng(77)
    dup = reach_bad = 0
    for trial in range(10_000):
        L = int(rng.integers(2, 40))
        n = int(rng.integers(1, 9))
        D = int(rng.integers(1, 6))
        cfg = AlleyConfig(length_L=L, sensing_range_D=D, comm_range=int(rng.integers(D, 3 * D + 1)))
        states = []
        for i in range(n):
            d = E if rng.random() < 0.5 else W
            c = int(rng.integers(0, L + 1))
            states.append(VehicleState(i, d, c if d is E else L - c))
        hops = int(rng.integers(1, 5))
        relay = bool(rng.random() < 0.8)
        lossy = trial % 2 == 1
        comm = CommConfig(float(rng.random()) if lossy else 0.0, relay, hops)
        msgs = [Message(s.id, q, 0, TypeOnly(VType.SR)) for s in states for q in range(2)]
        inbox = broadcast_round(msgs + msgs[::-1], states, comm, cfg, rng)
        for vid, box in inbox.items():
            keys = [m.key for m in box]
            if len(keys) != len(set(keys)) or any(m.source_id == vid for m in box):
                dup += 1
        if not lossy:
            coords = {s.id: s.coord(L) for s in states}
            limit = hops if relay else 1
            for s in states:
                want = {v for v, h in _bfs(coords, cfg.comm_range, s.id).items() if 0 < h <= limit}
                got = {r for r, box in inbox.items() if any(m.source_id == s.id for m in box)}
                reach_bad += got != want
    ok = dup == 0 and reach_bad == 0
    verdict(7, ok, f"10000 topologies: {dup} dedup violations, {reach_bad} reachability mismatches")
    assert ok


def _fuzz_scenario(rng, seed):
    L = int(rng.integers(2, 11))
    n = int(rng.integers(1, min(6, L + 1) + 1))
    cells = sorted(rng.choice(L + 1, size=n, replace=False).tolist())
    split = int(rng.integers(0, n + 1))
    east = tuple(c for c in cells[:split] if c < L)
    west = tuple(L - c for c in cells[split:] if c > 0)
    if not east and not west:
        east = (0,)
    cfg = AlleyConfig(length_L=L, collision_cost_k=int(rng.integers(0, 11)),
                      sensing_range_D=int(rng.integers(1, 5)))
    comm = CommConfig(loss_probability=float(rng.choice([0.0, 0.3])), relay_enabled=bool(rng.random() < 0.7))
    return Scenario(config=cfg, comm_cfg=comm, east_positions=east, west_positions=west,
                    type_prior=float(rng.random()), seed=seed)


def test_criterion_8_safety_fuzz(verdict):
    rng = np.random.default_rng(8)
    policies = list(PolicyKind)
    episodes = 100_000
    violations = 0
    first = None
    for i in range(episodes):
        sc = _fuzz_scenario(rng, i)
        try:
            run_episode(sc, policies[i % len(policies)], check_invariants=True)
        except (AssertionError, RuntimeError) as exc:
            violations += 1
            first = first or (sc, exc)
    verdict(8, violations == 0, f"{episodes} episodes over {len(policies)} policies, "
                                f"{violations} invariant violations")
    assert violations == 0, first
