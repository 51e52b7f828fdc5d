"""Command-line front end: ``alley-game run | preset | oracle``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

from .config import ConfigError, RunConfig, help_text, load_config, to_mapping
from .planning import ORACLE_MAX_LENGTH, ORACLE_MAX_VEHICLES, minmax_oracle
from .sim import (EpisodeResult, Scenario, paired_reduction, price_of_anarchy, run_episode,
                  summarize)
from .strategy import PolicyKind

log = logging.getLogger(__name__)

CSV_COLUMNS = ("policy", "replication", "seed", "vehicle_id", "direction", "vtype",
               "elapsed_time", "slots_used", "collisions", "terminated")
FIG6_COLUMNS = ("vehicles_per_side", "policy", "replications", "seed", "poa", "exact_optimum",
                "horizon_hits", "mean_elapsed_all", "non_termination_rate")
FIG5_POLICIES = tuple(PolicyKind)
FIG6_POLICIES = (PolicyKind.GAME_NO_COMM, PolicyKind.GAME_COMM_TYPES,
                 PolicyKind.GAME_COMM_TYPES_STATE, PolicyKind.CENTRAL_AUTHORITY)
FIG6_LENGTH = 8


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------- execution

def _chunk(args):
    scenario, policy, seeds = args
    return [run_episode(scenario.with_seed(s), policy) for s in seeds]


def run_replications(scenario: Scenario, policy: PolicyKind, replications: int,
                     jobs: int = 1) -> list[EpisodeResult]:
    """Episodes with seeds ``scenario.seed + r``, returned in replication order."""
    seeds = [scenario.seed + r for r in range(replications)]
    if jobs <= 1 or replications < 2:
        return _chunk((scenario, policy, seeds))
    size = -(-replications // (4 * jobs))
    parts = [(scenario, policy, seeds[i:i + size]) for i in range(0, replications, size)]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        out = []
        for chunk in pool.map(_chunk, parts):  # map preserves submission order
            out.extend(chunk)
    return out


@dataclass
class PolicyRun:
    policy: PolicyKind
    results: list


def _row(policy: PolicyKind, r: int, seed: int, res: EpisodeResult) -> dict:
    vs = res.vehicles
    return {
        "policy": policy.value,
        "replication": r,
        "seed": seed,
        "vehicle_id": ";".join(str(v.id) for v in vs),
        "direction": ";".join(v.direction.value for v in vs),
        "vtype": ";".join(v.vtype.value for v in vs),
        "elapsed_time": ";".join(str(v.elapsed_time) for v in vs),
        "slots_used": res.slots_used,
        "collisions": len(res.collisions),
        "terminated": res.terminated,
    }


def _summary(runs: Sequence[PolicyRun], baseline: list, scenario: Scenario, poa: bool) -> list[dict]:
    base = [r.mean_elapsed for r in baseline]
    out = []
    for run in runs:
        stats = summarize(run.policy, run.results)
        row = {
            "policy": run.policy.value,
            "episodes": stats.episodes,
            "mean_elapsed_per_vehicle": _num(stats.mean_elapsed_per_vehicle),
            "mean_elapsed_all": _num(sum(stats.per_episode_mean) / stats.episodes),
            "max_elapsed_mean": _num(stats.max_elapsed_mean),
            "non_termination_rate": _num(stats.non_termination_rate),
        }
        red = paired_reduction(base, stats.per_episode_mean)
        row.update(reduction_vs_random_pct=_num(red.percent), reduction_ci95_low=_num(red.ci_low),
                   reduction_ci95_high=_num(red.ci_high))
        if poa:
            p = price_of_anarchy(stats, scenario, stats.episodes, scenario.seed)
            row.update(poa=_num(p.value), poa_exact_optimum=p.exact_optimum,
                       poa_horizon_hits=p.horizon_hits)
        out.append(row)
    return out


def _num(x: float):
    # fixed precision keeps output files byte-stable across platforms
    return None if x != x else round(float(x), 6)


def execute(cfg: RunConfig, jobs: int = 1, poa: bool = False) -> dict:
    scenario = cfg.scenario()
    runs = [PolicyRun(p, run_replications(scenario, p, cfg.replications, jobs)) for p in cfg.policies]
    baseline = next((r.results for r in runs if r.policy is PolicyKind.RANDOM), None)
    if baseline is None:
        baseline = run_replications(scenario, PolicyKind.RANDOM, cfg.replications, jobs)
    rows = [_row(run.policy, r, scenario.seed + r, res)
            for run in runs for r, res in enumerate(run.results)]
    return {"rows": rows, "summary": _summary(runs, baseline, scenario, poa)}


# ---------------------------------------------------------------- presets

def preset_config(name: str, base: RunConfig | None = None, vehicles: int = 1) -> RunConfig:
    base = base or RunConfig()
    if name == "fig5":
        return replace(base, length_L=20, collision_cost_k=10, east=(0,), west=(0,), types=None,
                       safety_horizon=None, preset="fig5")
    if name == "fig6":
        n = tuple(range(vehicles))
        return replace(base, length_L=FIG6_LENGTH, collision_cost_k=10, east=n, west=n, types=None,
                       safety_horizon=None, preset="fig6")
    raise ConfigError(f"run.preset: unknown preset {name!r}")


def fig6_table(base: RunConfig, max_vehicles: int, jobs: int = 1) -> list[dict]:
    table = []
    for n in range(1, max_vehicles + 1):
        cfg = preset_config("fig6", base, n)
        scenario = cfg.scenario()
        for policy in cfg.policies:
            results = run_replications(scenario, policy, cfg.replications, jobs)
            stats = summarize(policy, results)
            p = price_of_anarchy(stats, scenario, cfg.replications, scenario.seed)
            table.append({
                "vehicles_per_side": n, "policy": policy.value, "replications": cfg.replications,
                "seed": scenario.seed, "poa": _num(p.value), "exact_optimum": p.exact_optimum,
                "horizon_hits": p.horizon_hits,
                "mean_elapsed_all": _num(sum(stats.per_episode_mean) / stats.episodes),
                "non_termination_rate": _num(stats.non_termination_rate),
            })
    return table


# ---------------------------------------------------------------- output

def _csv_text(rows: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({c: _cell(row[c]) for c in columns})
    return buf.getvalue()


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    return v


def _write(path: str, text: str) -> None:
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _json_text(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


def summary_sidecar(path: str) -> str:
    root, _ = os.path.splitext(path)
    return root + ".summary.json"


def format_summary(summary: Sequence[dict]) -> str:
    head = f"{'policy':<20} {'episodes':>8} {'mean(all)':>10} {'mean(done)':>10} " \
           f"{'max mean':>9} {'nonterm':>8} {'reduction%':>10}"
    lines = [head]
    for s in summary:
        done = s["mean_elapsed_per_vehicle"]
        line = (f"{s['policy']:<20} {s['episodes']:>8} {s['mean_elapsed_all']:>10.2f} "
                f"{'nan' if done is None else format(done, '.2f'):>10} "
                f"{'nan' if s['max_elapsed_mean'] is None else format(s['max_elapsed_mean'], '.2f'):>9} "
                f"{s['non_termination_rate']:>8.3f} {s['reduction_vs_random_pct']:>10.1f}")
        if "poa" in s:
            line += f"  PoA {s['poa']:.3f}{'' if s['poa_exact_optimum'] else ' (central denominator)'}"
        lines.append(line)
    return "\n".join(lines)


def format_fig6(table: Sequence[dict]) -> str:
    policies = list(dict.fromkeys(r["policy"] for r in table))
    counts = sorted({r["vehicles_per_side"] for r in table})
    lines = ["PoA by vehicles per side (* = central-plan denominator)",
             f"{'n':>3} " + " ".join(f"{p:>20}" for p in policies)]
    for n in counts:
        cells = []
        for p in policies:
            r = next(x for x in table if x["vehicles_per_side"] == n and x["policy"] == p)
            cells.append(f"{r['poa']:>19.3f}{' ' if r['exact_optimum'] else '*'}")
        lines.append(f"{n:>3} " + " ".join(cells))
    return "\n".join(lines)


def _emit_run(cfg: RunConfig, report: dict, metadata: dict) -> str:
    fmt = cfg.output_format
    path = cfg.output_path or f"results.{fmt}"
    if fmt == "json":
        _write(path, _json_text({"metadata": metadata, "rows": report["rows"],
                                 "summary": report["summary"]}))
    else:
        _write(path, _csv_text(report["rows"], CSV_COLUMNS))
        _write(summary_sidecar(path), _json_text({"metadata": metadata, "summary": report["summary"]}))
    return path


# ---------------------------------------------------------------- commands

def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.out:
        cfg = replace(cfg, output_path=args.out)
    if args.format:
        cfg = replace(cfg, output_format=args.format)
    if cfg.preset == "fig6":
        return _fig6(cfg, args.max_vehicles, args.jobs, cfg.output_path, {"preset": "fig6"})
    metadata = {"command": "run"}
    if cfg.preset == "fig5":
        metadata["preset_override"] = {"length_L": 20, "collision_cost_k": 10, "east": [0],
                                       "west": [0]}
        cfg = preset_config("fig5", cfg)
    metadata["config"] = to_mapping(cfg)
    report = execute(cfg, args.jobs, args.poa)
    path = _emit_run(cfg, report, metadata)
    print(format_summary(report["summary"]))
    print(f"wrote {len(report['rows'])} rows to {path}")
    return 0


def _fig6(cfg: RunConfig, max_vehicles: int, jobs: int, out: str | None, metadata: dict) -> int:
    table = fig6_table(cfg, max_vehicles, jobs)
    print(format_fig6(table))
    if out:
        if out.endswith(".json"):
            _write(out, _json_text({"metadata": metadata, "table": table}))
        else:
            _write(out, _csv_text(table, FIG6_COLUMNS))
        print(f"wrote {len(table)} rows to {out}")
    return 0


def cmd_preset(args) -> int:
    base = RunConfig(seed=args.seed, replications=args.replications,
                     policies=FIG5_POLICIES if args.name == "fig5" else FIG6_POLICIES)
    if args.name == "fig6":
        return _fig6(base, args.max_vehicles, args.jobs, args.out,
                     {"preset": "fig6", "seed": args.seed, "replications": args.replications})
    cfg = preset_config("fig5", base)
    report = execute(cfg, args.jobs, poa=False)
    print(format_summary(report["summary"]))
    if args.out:
        cfg = replace(cfg, output_path=args.out,
                      output_format="json" if args.out.endswith(".json") else "csv")
        path = _emit_run(cfg, report, {"command": "preset", "preset": "fig5",
                                       "config": to_mapping(cfg)})
        print(f"wrote {len(report['rows'])} rows to {path}")
    return 0


def cmd_oracle(args) -> int:
    cfg = load_config(args.config)
    scenario = cfg.scenario()
    states = scenario.initial_states()
    if len(states) > ORACLE_MAX_VEHICLES or scenario.config.length_L > ORACLE_MAX_LENGTH:
        raise ConfigError(f"oracle: instance too large (at most {ORACLE_MAX_VEHICLES} vehicles "
                          f"and length_L <= {ORACLE_MAX_LENGTH})")
    value, schedule = minmax_oracle(states, scenario.config)
    print(f"min-max optimum: {value}")
    for t, joint in enumerate(schedule):
        print(f"slot {t}: " + " ".join(f"{s.id}:{a.name}" for s, a in zip(states, joint)))
    return 0


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="alley-game", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run experiments from a TOML config",
                         epilog=help_text(), formatter_class=argparse.RawDescriptionHelpFormatter)
    run.add_argument("--config", required=True, help="TOML config file")
    run.add_argument("--out", help="output file (overrides run.output_path)")
    run.add_argument("--format", choices=("csv", "json"), help="overrides run.output_format")
    run.add_argument("--jobs", type=_positive, default=1, help="worker processes (default 1)")
    run.add_argument("--poa", action="store_true", help="also report the Price of Anarchy")
    run.add_argument("--max-vehicles", type=_positive, default=4,
                     help="largest group size for the fig6 preset (default 4)")
    run.set_defaults(func=cmd_run)

    pre = sub.add_parser("preset", help="elapsed-time (fig5) or PoA (fig6) experiment")
    pre.add_argument("name", choices=("fig5", "fig6"))
    pre.add_argument("--max-vehicles", type=_positive, default=4,
                     help="fig6: vehicles per side swept 1..N (default 4)")
    pre.add_argument("--replications", type=_positive, default=1000, help="default 1000")
    pre.add_argument("--seed", type=int, default=0, help="base seed (default 0)")
    pre.add_argument("--out", help="optional result file (.csv or .json)")
    pre.add_argument("--jobs", type=_positive, default=1, help="worker processes (default 1)")
    pre.set_defaults(func=cmd_preset)

    ora = sub.add_parser("oracle", help="print the min-max optimum for a small instance")
    ora.add_argument("--config", required=True)
    ora.set_defaults(func=cmd_oracle)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"alley-game: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failures map to exit code 2
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


run_cli = main

if __name__ == "__main__":
    sys.exit(main())
