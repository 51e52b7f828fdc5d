import csv
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from alley_game.cli import CSV_COLUMNS, main, summary_sidecar
from alley_game.config import ConfigError, RunConfig, parse_config, render
from alley_game.model import VType
from alley_game.strategy import PolicyKind

MINIMAL = """
[scenario]
length_L = 20
collision_cost_k = 10
east = [0]
west = [0]
seed = 42

[run]
policies = ["GameCommTypes"]
replications = 100
"""


def test_minimal_config():
    cfg = parse_config(MINIMAL)
    assert (cfg.length_L, cfg.collision_cost_k, cfg.east, cfg.west, cfg.seed) == (20, 10, (0,), (0,), 42)
    assert cfg.policies == (PolicyKind.GAME_COMM_TYPES,)
    assert cfg.replications == 100 and cfg.output_format == "csv"
    sc = cfg.scenario()
    assert sc.config.comm_range == 6 and sc.config.safety_horizon == 200
    assert sc.comm_cfg.loss_probability == 0.0


def test_loss_probability_out_of_range():
    with pytest.raises(ConfigError, match=r"comms\.loss_probability"):
        parse_config("[comms]\nloss_probability = 1.5\n")


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match=r"scenario\.speeed"):
        parse_config("[scenario]\nspeeed = 3\n")
    with pytest.raises(ConfigError, match="extras"):
        parse_config("[extras]\na = 1\n")


@pytest.mark.parametrize("text, path", [
    ("[scenario]\nlength_L = 1\n", "scenario.length_L"),
    ("[scenario]\nlength_L = 5\neast = [5]\n", r"scenario\.east\[0\]"),
    ("[scenario]\ntypes = ['UR', 'XX']\n", r"scenario\.types\[1\]"),
    ("[scenario]\ntypes = ['UR', 'SR']\ntype_prior = 0.3\n", "scenario.types"),
    ("[scenario]\nsensing_range_D = 4\ncomm_range = 2\n", "scenario.comm_range"),
    ("[scenario]\nsafety_horizon = 10\n", "scenario.safety_horizon"),
    ("[utility]\nthreshold_UR = 1\nthreshold_SR = 2\n", "utility.threshold_UR"),
    ("[utility]\nslope = 0\n", "utility.slope"),
    ("[run]\npolicies = ['Greedy']\n", r"run\.policies\[0\]"),
    ("[run]\noutput_format = 'xml'\n", "run.output_format"),
    ("[run]\nreplications = 0\n", "run.replications"),
    ("[comms]\nrelay_enabled = 1\n", "comms.relay_enabled"),
    ("[scenario]\neast = [3]\nwest = [19]\n", "scenario"),
])
def test_validation_names_key(text, path):
    with pytest.raises(ConfigError, match=path):
        parse_config(text)


def test_malformed_document():
    with pytest.raises(ConfigError, match="malformed"):
        parse_config("[scenario\nlength_L = ")


@st.composite
def run_configs(draw):
    L = draw(st.integers(2, 40))
    cells = sorted(draw(st.lists(st.integers(0, L), unique=True, min_size=1, max_size=min(6, L))))
    split = draw(st.integers(0, len(cells)))
    east = tuple(c for c in cells[:split] if c < L)
    west = tuple(L - c for c in cells[split:] if c > 0)
    if not east and not west:
        east = (0,)
    D = draw(st.integers(1, 5))
    n = len(east) + len(west)
    typed = draw(st.booleans())
    lo, hi = sorted(draw(st.lists(st.floats(0, 100, allow_nan=False), min_size=2, max_size=2)))
    util = draw(st.booleans())
    return RunConfig(
        length_L=L, collision_cost_k=draw(st.integers(0, 20)), sensing_range_D=D,
        comm_range=draw(st.one_of(st.none(), st.integers(D, 4 * D))),
        safety_horizon=draw(st.one_of(st.none(), st.integers(2 * L + 1, 20 * L))),
        east=east, west=west,
        types=tuple(draw(st.lists(st.sampled_from(list(VType)), min_size=n, max_size=n))) if typed else None,
        type_prior=None if typed else draw(st.one_of(st.none(), st.floats(0, 1))),
        seed=draw(st.integers(0, 2 ** 63 - 1)),
        loss_probability=draw(st.floats(0, 1)), relay_enabled=draw(st.booleans()),
        max_hops=draw(st.integers(1, 6)),
        plateau_payoff=draw(st.floats(1, 1e4)) if util else None,
        threshold_UR=hi if util else None, threshold_SR=lo if util else None,
        slope=draw(st.floats(0.01, 10)) if util else None,
        policies=tuple(draw(st.lists(st.sampled_from(list(PolicyKind)), min_size=1, unique=True))),
        replications=draw(st.integers(1, 10 ** 6)),
        output_path=draw(st.one_of(st.none(), st.sampled_from(["out.csv", "r/x.json"]))),
        output_format=draw(st.sampled_from(["csv", "json"])),
        preset=draw(st.one_of(st.none(), st.sampled_from(["fig5", "fig6"]))),
    )


@settings(max_examples=200, deadline=None)
@given(run_configs())
def test_render_round_trip(cfg):
    assert parse_config(render(cfg)) == cfg


def _write(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_run_happy_path(tmp_path, capsys):
    conf = _write(tmp_path, MINIMAL)
    out = tmp_path / "res.csv"
    assert main(["run", "--config", conf, "--out", str(out)]) == 0
    with open(out, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 100
    assert tuple(rows[0]) == CSV_COLUMNS
    assert [int(r["seed"]) for r in rows] == list(range(42, 142))
    summary = json.loads(open(summary_sidecar(str(out))).read())["summary"]
    assert summary[0]["policy"] == "GameCommTypes"
    assert summary[0]["reduction_vs_random_pct"] > 0
    assert "reduction%" in capsys.readouterr().out


def test_run_json_with_poa(tmp_path):
    conf = _write(tmp_path, MINIMAL.replace("length_L = 20", "length_L = 6")
                  .replace("replications = 100", "replications = 5"))
    out = tmp_path / "res.json"
    assert main(["run", "--config", conf, "--out", str(out), "--format", "json", "--poa"]) == 0
    doc = json.loads(out.read_text())
    assert len(doc["rows"]) == 5
    assert doc["summary"][0]["poa_exact_optimum"] is True
    assert doc["metadata"]["config"]["scenario"]["length_L"] == 6


def test_output_is_byte_identical_across_jobs(tmp_path):
    conf = _write(tmp_path, MINIMAL.replace('["GameCommTypes"]', '["Random", "GameNoComm"]')
                  .replace("replications = 100", "replications = 40"))
    a, b = tmp_path / "a" / "r.csv", tmp_path / "b" / "r.csv"
    assert main(["run", "--config", conf, "--out", str(a)]) == 0
    assert main(["run", "--config", conf, "--out", str(b), "--jobs", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()
    sa = json.loads(open(summary_sidecar(str(a))).read())
    sb = json.loads(open(summary_sidecar(str(b))).read())
    assert sa["summary"] == sb["summary"]


def test_preset_records_override(tmp_path):
    conf = _write(tmp_path, "[scenario]\nlength_L = 6\n[run]\npreset = 'fig5'\nreplications = 3\n"
                            "policies = ['CentralAuthority']\n")
    out = tmp_path / "r.json"
    assert main(["run", "--config", conf, "--out", str(out), "--format", "json"]) == 0
    doc = json.loads(out.read_text())
    assert doc["metadata"]["preset_override"]["length_L"] == 20
    assert doc["metadata"]["config"]["scenario"]["length_L"] == 20


def test_preset_fig6(tmp_path, capsys):
    out = tmp_path / "f6.csv"
    args = ["preset", "fig6", "--max-vehicles", "2", "--replications", "20", "--seed", "7",
            "--out", str(out)]
    assert main(args) == 0
    with open(out, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 8
    central = [r for r in rows if r["policy"] == "CentralAuthority"]
    assert all(float(r["poa"]) == 1.0 and r["exact_optimum"] == "true" for r in central)
    first = out.read_bytes()
    assert main(args) == 0
    assert out.read_bytes() == first
    assert "PoA by vehicles per side" in capsys.readouterr().out


def test_oracle_command(tmp_path, capsys):
    conf = _write(tmp_path, "[scenario]\nlength_L = 4\neast = [1]\nwest = [1]\n")
    assert main(["oracle", "--config", conf]) == 0
    assert "min-max optimum: 7" in capsys.readouterr().out
    big = _write(tmp_path, "[scenario]\nlength_L = 20\n", "big.toml")
    assert main(["oracle", "--config", big]) == 1


def test_exit_codes(tmp_path, monkeypatch):
    assert main(["run", "--config", str(tmp_path / "missing.toml")]) == 1
    assert main(["run", "--config", _write(tmp_path, "[scenario]\nspeeed = 1\n")]) == 1
    assert main(["frobnicate"]) == 1

    def boom(*_a, **_k):
        raise RuntimeError("solver failure")

    monkeypatch.setattr("alley_game.cli.execute", boom)
    assert main(["run", "--config", _write(tmp_path, MINIMAL, "ok.toml")]) == 2


def test_help_lists_defaults(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["run", "--help"])
    assert exc.value.code == 0
    text = capsys.readouterr().out
    assert "scenario.length_L" in text and "default 20" in text
