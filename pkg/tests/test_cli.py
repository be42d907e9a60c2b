import csv
import json
import math
from pathlib import Path

import pytest

from cosmon import cli, experiments
from cosmon.solver import SolveFailureError

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"


def _write(tmp_path, obj, name="c.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return p


def test_missing_config_exit_2(tmp_path):
    assert cli.run("trace", tmp_path / "missing.json", tmp_path / "o") == 2


def test_bad_json_exit_2(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert cli.run("trace", p, tmp_path / "o") == 2


@pytest.mark.parametrize("cfg", [
    {"grid": {"n_t": "many"}},
    {"unknown": 1},
    {"background": {"a_rot": -1.0}},
    {"tolerances": {"made_up": 1.0}},
])
def test_schema_violation_exit_2(tmp_path, cfg):
    assert cli.run("trace", _write(tmp_path, cfg), tmp_path / "o") == 2


@pytest.mark.parametrize("cfg", [
    {"absorber": {"R": 2.5}},                          # R <= R0
    {"background": {"a_rot": 2.0}},                    # 1 - a^2/R^2 < 9/10
    {"grid": {"r_max": 5.0}},                          # r_max <= R + 2
    {"grid": {"n_t": 500}},                            # not a power of two
])
def test_cross_field_exit_2(tmp_path, cfg):
    assert cli.run("trace", _write(tmp_path, cfg), tmp_path / "o") == 2


def test_trace_documented_row(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["trace", "--config", str(CONFIGS / "trace.json"), "--out", str(out), "-q"]) == 0
    rows = list(csv.DictReader(open(out / "rays.csv")))
    row = next(r for r in rows if float(r["s"]) == 1.0)
    assert float(row["r"]) == pytest.approx(math.sqrt(5.0), rel=1e-9)
    report = json.loads((out / "report.json").read_text())
    assert report["passed"] and report["exit_status"] == 0
    assert {c["name"] for c in report["checks"]} >= {"ray_closed_form", "ray_conservation"}


def test_seed_override_and_threads_env(tmp_path, monkeypatch):
    monkeypatch.setenv("COSMON_THREADS", "3")
    assert cli.resolve_threads(None) == 3
    assert cli.resolve_threads(2) == 2
    monkeypatch.setenv("COSMON_THREADS", "lots")
    assert cli.resolve_threads(None) == 1
    out = tmp_path / "o"
    assert cli.run("trace", CONFIGS / "trace.json", out, seed=42) == 0
    assert json.loads((out / "report.json").read_text())["seed"] == 42


def test_invariant_failure_exit_1(tmp_path):
    p = _write(tmp_path, {"tolerances": {"ray_closed_form": 1e-30}})
    out = tmp_path / "o"
    assert cli.run("trace", p, out) == 1
    report = json.loads((out / "report.json").read_text())
    assert not report["passed"] and report["n_failed"] >= 1


def test_numerical_failure_exit_3(tmp_path, monkeypatch):
    def boom(*args, **kwargs):
        raise SolveFailureError(1.0, 0.0, "singular")

    monkeypatch.setitem(experiments.EXPERIMENTS, "escape", boom)
    assert cli.run("escape", CONFIGS / "escape.json", tmp_path / "o") == 3


def test_unknown_experiment_rejected(tmp_path):
    assert cli.run("nope", CONFIGS / "trace.json", tmp_path / "o") == 2
    with pytest.raises(SystemExit) as err:
        cli.main(["nope", "--config", str(CONFIGS / "trace.json")])
    assert err.value.code == 2


def test_schema_copies_agree():
    packaged = ROOT / "src" / "cosmon" / "config.schema.json"
    assert json.loads(packaged.read_text()) == json.loads((ROOT / "docs" / "config.schema.json").read_text())


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.json")))
def test_shipped_configs_load(path):
    cfg = cli.load_config(path)
    assert cfg["background"]["a_rot"] > 0


def test_escape_experiment(tmp_path):
    assert cli.run("escape", CONFIGS / "escape.json", tmp_path / "o") == 0
    rows = list(csv.DictReader(open(tmp_path / "o" / "escape.csv")))
    assert all(abs(float(r["escape_t"]) - float(r["closed_form_t"])) < 1e-6 for r in rows)
