"""Run configuration: parsing, validation and rendering of TOML documents."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import tomli
import tomlkit

from .comms import CommConfig
from .model import AlleyConfig, UtilityParams, VType
from .sim import Scenario
from .strategy import PolicyKind

PRESETS = ("fig5", "fig6")
FORMATS = ("csv", "json")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key path."""


@dataclass(frozen=True)
class RunConfig:
    # scenario
    length_L: int = 20
    collision_cost_k: int = 10
    sensing_range_D: int = 3
    comm_range: int | None = None  # None: twice the sensing range
    safety_horizon: int | None = None  # None: 10 * length_L
    east: tuple = (0,)
    west: tuple = (0,)
    types: tuple | None = None
    type_prior: float | None = None  # None: 0.5 unless types are given
    seed: int = 0
    # comms
    loss_probability: float = 0.0
    relay_enabled: bool = True
    max_hops: int = 3
    # utility; None picks the length-scaled default
    plateau_payoff: float | None = None
    threshold_UR: float | None = None
    threshold_SR: float | None = None
    slope: float | None = None
    # run
    policies: tuple = tuple(PolicyKind)
    replications: int = 100
    output_path: str | None = None
    output_format: str = "csv"
    preset: str | None = None

    def alley(self) -> AlleyConfig:
        return AlleyConfig(length_L=self.length_L, collision_cost_k=self.collision_cost_k,
                           sensing_range_D=self.sensing_range_D, comm_range=self.comm_range,
                           safety_horizon=self.safety_horizon)

    def utility_params(self, alley: AlleyConfig | None = None) -> UtilityParams:
        given = {k: getattr(self, k) for k in _SECTIONS["utility"] if getattr(self, k) is not None}
        return UtilityParams.for_config(alley or self.alley(), **given)

    def scenario(self) -> Scenario:
        alley = self.alley()
        return Scenario(config=alley,
                        comm_cfg=CommConfig(self.loss_probability, self.relay_enabled, self.max_hops),
                        utility_params=self.utility_params(alley),
                        east_positions=self.east, west_positions=self.west,
                        types=self.types,
                        type_prior=0.5 if self.type_prior is None else self.type_prior,
                        seed=self.seed)


_SECTIONS = {
    "scenario": ("length_L", "collision_cost_k", "sensing_range_D", "comm_range", "safety_horizon",
                 "east", "west", "types", "type_prior", "seed"),
    "comms": ("loss_probability", "relay_enabled", "max_hops"),
    "utility": ("plateau_payoff", "threshold_UR", "threshold_SR", "slope"),
    "run": ("policies", "replications", "output_path", "output_format", "preset"),
}

KEY_HELP = {
    "scenario.length_L": "alley length in cells, >= 2 (default 20)",
    "scenario.collision_cost_k": "slots added per collision, integer >= 0 (default 10)",
    "scenario.sensing_range_D": "sensing radius in cells, >= 1 (default 3)",
    "scenario.comm_range": "radio range in cells, >= sensing_range_D (default 2 * sensing_range_D)",
    "scenario.safety_horizon": "slot cap per episode, > 2 * length_L (default 10 * length_L)",
    "scenario.east": "initial passed distances of eastbound vehicles (default [0])",
    "scenario.west": "initial passed distances of westbound vehicles (default [0])",
    "scenario.types": "explicit types, east first, each UR or SR (default: drawn)",
    "scenario.type_prior": "P(UR) for drawn types, in [0, 1] (default 0.5)",
    "scenario.seed": "base seed; replication r uses seed + r (default 0)",
    "comms.loss_probability": "per-hop delivery failure probability in [0, 1] (default 0)",
    "comms.relay_enabled": "rebroadcast received messages (default true)",
    "comms.max_hops": "flooding depth, >= 1 (default 3)",
    "utility.plateau_payoff": "payoff on the plateau (default (1 + k) * (horizon + 1) + 4L)",
    "utility.threshold_UR": "end of the UR plateau in slots (default 2L)",
    "utility.threshold_SR": "end of the SR plateau in slots, <= threshold_UR (default L)",
    "utility.slope": "decay per slot past the threshold, > 0 (default 1)",
    "run.policies": "policy names (default all five)",
    "run.replications": "episodes per policy, >= 1 (default 100)",
    "run.output_path": "result file (default results.csv or results.json)",
    "run.output_format": "csv or json (default csv)",
    "run.preset": "fig5 or fig6; replaces the scenario geometry (default none)",
}


def _int(path, v, lo=None):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{path}: expected an integer, got {v!r}")
    if lo is not None and v < lo:
        raise ConfigError(f"{path}: must be >= {lo}, got {v}")
    return v


def _real(path, v):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {v!r}")
    return float(v)


def _prob(path, v):
    v = _real(path, v)
    if not 0.0 <= v <= 1.0:
        raise ConfigError(f"{path}: must lie in [0, 1], got {v}")
    return v


def _positions(path, v):
    if not isinstance(v, list):
        raise ConfigError(f"{path}: expected a list of integers")
    return tuple(_int(f"{path}[{i}]", x, 0) for i, x in enumerate(v))


def _types(path, v):
    if not isinstance(v, list):
        raise ConfigError(f"{path}: expected a list of UR/SR")
    out = []
    for i, t in enumerate(v):
        try:
            out.append(VType(t))
        except ValueError:
            raise ConfigError(f"{path}[{i}]: expected UR or SR, got {t!r}") from None
    return tuple(out)


def _policies(path, v):
    if not isinstance(v, list) or not v:
        raise ConfigError(f"{path}: expected a non-empty list of policy names")
    out = []
    for i, name in enumerate(v):
        try:
            p = PolicyKind.parse(str(name))
        except ValueError:
            names = ", ".join(p.value for p in PolicyKind)
            raise ConfigError(f"{path}[{i}]: unknown policy {name!r} (choose from {names})") from None
        if p in out:
            raise ConfigError(f"{path}[{i}]: duplicate policy {p.value}")
        out.append(p)
    return tuple(out)


def _choice(options):
    def check(path, v):
        if v not in options:
            raise ConfigError(f"{path}: expected one of {', '.join(options)}, got {v!r}")
        return v
    return check


def _string(path, v):
    if not isinstance(v, str) or not v:
        raise ConfigError(f"{path}: expected a non-empty string")
    return v


def _bool(path, v):
    if not isinstance(v, bool):
        raise ConfigError(f"{path}: expected true or false")
    return v


_CHECKS = {
    "length_L": lambda p, v: _int(p, v, 2),
    "collision_cost_k": lambda p, v: _int(p, v, 0),
    "sensing_range_D": lambda p, v: _int(p, v, 1),
    "comm_range": lambda p, v: _int(p, v, 1),
    "safety_horizon": lambda p, v: _int(p, v, 1),
    "east": _positions,
    "west": _positions,
    "types": _types,
    "type_prior": _prob,
    "seed": lambda p, v: _int(p, v, 0),
    "loss_probability": _prob,
    "relay_enabled": _bool,
    "max_hops": lambda p, v: _int(p, v, 1),
    "plateau_payoff": _real,
    "threshold_UR": _real,
    "threshold_SR": _real,
    "slope": _real,
    "policies": _policies,
    "replications": lambda p, v: _int(p, v, 1),
    "output_path": _string,
    "output_format": _choice(FORMATS),
    "preset": _choice(PRESETS),
}


def from_mapping(doc: dict) -> RunConfig:
    unknown = []
    values: dict[str, Any] = {}
    for section, body in doc.items():
        if section not in _SECTIONS:
            unknown.append(section)
            continue
        if not isinstance(body, dict):
            raise ConfigError(f"{section}: expected a table")
        for key, v in body.items():
            if key not in _SECTIONS[section]:
                unknown.append(f"{section}.{key}")
                continue
            values[key] = _CHECKS[key](f"{section}.{key}", v)
    if unknown:
        raise ConfigError("unknown keys: " + ", ".join(sorted(unknown)))
    if "types" in values and "type_prior" in values:
        raise ConfigError("scenario.types: give either types or type_prior, not both")
    cfg = RunConfig(**values)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    L = cfg.length_L
    if cfg.comm_range is not None and cfg.comm_range < cfg.sensing_range_D:
        raise ConfigError("scenario.comm_range: must be >= scenario.sensing_range_D")
    if cfg.safety_horizon is not None and cfg.safety_horizon <= 2 * L:
        raise ConfigError(f"scenario.safety_horizon: must exceed 2 * length_L = {2 * L}")
    for name in ("east", "west"):
        for i, x in enumerate(getattr(cfg, name)):
            if x >= L:
                raise ConfigError(f"scenario.{name}[{i}]: passed distance {x} must be < length_L")
    if cfg.types is not None and len(cfg.types) != len(cfg.east) + len(cfg.west):
        raise ConfigError("scenario.types: need one entry per vehicle (east first)")
    if cfg.slope is not None and cfg.slope <= 0:
        raise ConfigError("utility.slope: must be > 0")
    defaults = UtilityParams.for_config(cfg.alley())
    thr_ur = defaults.threshold_UR if cfg.threshold_UR is None else cfg.threshold_UR
    thr_sr = defaults.threshold_SR if cfg.threshold_SR is None else cfg.threshold_SR
    if thr_ur < thr_sr:
        raise ConfigError(f"utility.threshold_UR: must be >= utility.threshold_SR ({thr_sr})")
    if cfg.preset is None:
        try:
            cfg.scenario()
        except ValueError as exc:
            raise ConfigError(f"scenario: {exc}") from None


def parse_config(text: str) -> RunConfig:
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    return from_mapping(doc)


def load_config(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)


def to_mapping(cfg: RunConfig) -> dict:
    out: dict[str, dict] = {}
    for section, keys in _SECTIONS.items():
        body = {}
        for key in keys:
            v = getattr(cfg, key)
            if v is None:
                continue
            if key in ("east", "west"):
                v = list(v)
            elif key == "types":
                v = [t.value for t in v]
            elif key == "policies":
                v = [p.value for p in v]
            body[key] = v
        out[section] = body
    return out


def render(cfg: RunConfig) -> str:
    doc = tomlkit.document()
    for section, body in to_mapping(cfg).items():
        table = tomlkit.table()
        for k, v in body.items():
            table.add(k, v)
        doc.add(section, table)
    return tomlkit.dumps(doc)


def help_text() -> str:
    width = max(map(len, KEY_HELP))
    return "config keys:\n" + "\n".join(f"  {k.ljust(width)}  {v}" for k, v in KEY_HELP.items())

