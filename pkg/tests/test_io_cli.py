import json
import subprocess

import numpy as np
import pytest

from fieldosc import cli, kernels
from fieldosc.analysis import fixed_points_single
from fieldosc.maps import MapParams
from fieldosc.report import write_fixed_points_csv, write_trace_csv
from fieldosc.scenario_io import (
    ScenarioError,
    apply_overrides,
    config_hash,
    dump_config,
    file_sha256,
    load_config,
    validate_config,
    write_manifest,
)
from fieldosc.sim import SimTrace


def minimal_sim_cfg(name="unit_sim", steps=40):
    return {
        "name": name,
        "pipeline": "simulate",
        "seed": 0,
        "params": {
            "engine": "synchronous",
            "steps": steps,
            "devices": [{"role": "oscillator", "alpha": 3.1, "x0": 0.1}],
            "coupling": {"kind": "explicit", "matrix": [[0.0]]},
        },
    }


# --- config round trips -----------------------------------------------------

def test_load_dump_load_identity(tmp_path):
    cfg = minimal_sim_cfg()
    p = tmp_path / "cfg.json"
    p.write_text(dump_config(cfg))
    loaded = load_config(p)
    assert loaded == cfg
    p2 = tmp_path / "cfg2.json"
    p2.write_text(dump_config(loaded))
    assert p2.read_text() == p.read_text()


def test_invalid_json_is_scenario_error(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    with pytest.raises(ScenarioError):
        load_config(p)


def test_unknown_keys_rejected_at_every_level():
    cfg = minimal_sim_cfg()
    cfg["typo_key"] = 1
    with pytest.raises(ScenarioError, match="typo_key"):
        validate_config(cfg)

    cfg = minimal_sim_cfg()
    cfg["params"]["stepz"] = 10
    with pytest.raises(ScenarioError, match="stepz"):
        validate_config(cfg)

    cfg = minimal_sim_cfg()
    cfg["params"]["devices"][0]["alpa"] = 3.0
    with pytest.raises(ScenarioError, match="alpa"):
        validate_config(cfg)

    cfg = minimal_sim_cfg()
    cfg["params"]["noise"] = {"amplitude_pos": 0.1, "colour": "pink"}
    with pytest.raises(ScenarioError, match="colour"):
        validate_config(cfg)


def test_empty_devices_rejected():
    cfg = minimal_sim_cfg()
    cfg["params"]["devices"] = []
    with pytest.raises(ScenarioError, match="empty"):
        validate_config(cfg)


def test_unknown_pipeline_and_analysis_kind():
    cfg = minimal_sim_cfg()
    cfg["pipeline"] = "render"
    with pytest.raises(ScenarioError, match="pipeline"):
        validate_config(cfg)
    bad = {"name": "x", "pipeline": "analyze", "seed": 0,
           "params": {"kind": "hexagram"}}
    with pytest.raises(ScenarioError, match="hexagram"):
        validate_config(bad)


def test_apply_overrides_paths_and_values():
    cfg = minimal_sim_cfg()
    out = apply_overrides(cfg, [
        "seed=9",
        "params.steps=77",
        "params.devices.0.x0=0.05",
        "name=renamed",
    ])
    assert out["seed"] == 9
    assert out["params"]["steps"] == 77
    assert out["params"]["devices"][0]["x0"] == 0.05
    assert out["name"] == "renamed"
    # the input is untouched
    assert cfg["seed"] == 0
    assert cfg["params"]["devices"][0]["x0"] == 0.1


def test_apply_overrides_json_and_string_values():
    cfg = minimal_sim_cfg()
    out = apply_overrides(cfg, ['description=plain words'])
    assert out["description"] == "plain words"
    out = apply_overrides(cfg, ['params.coupling.matrix=[[0.5]]'])
    assert out["params"]["coupling"]["matrix"] == [[0.5]]


def test_apply_overrides_error_paths():
    cfg = minimal_sim_cfg()
    with pytest.raises(ScenarioError, match="key=value"):
        apply_overrides(cfg, ["no_equals_sign"])
    with pytest.raises(ScenarioError, match="no key"):
        apply_overrides(cfg, ["params.devices.0.nested.x=1"])
    # an override that breaks validation is rejected too
    with pytest.raises(ScenarioError):
        apply_overrides(cfg, ["params.devices.0.fins=4"])


def test_config_hash_stable_and_order_free():
    a = minimal_sim_cfg()
    b = json.loads(json.dumps(a, sort_keys=True))
    assert config_hash(a) == config_hash(b)
    c = apply_overrides(a, ["seed=1"])
    assert config_hash(a) != config_hash(c)


# --- manifests and report writers -------------------------------------------

def test_manifest_checksums_match(tmp_path):
    cfg = minimal_sim_cfg()
    (tmp_path / "config.json").write_text(dump_config(cfg))
    (tmp_path / "table.csv").write_text("a,b\n1,2\n")
    man = write_manifest(tmp_path, cfg, ["config.json", "table.csv"])
    assert man.config_sha256 == config_hash(cfg)
    for name, digest in man.outputs.items():
        assert digest == file_sha256(tmp_path / name)
    doc = json.loads((tmp_path / "manifest.json").read_text())
    assert doc["outputs"] == man.outputs
    assert doc["flags"] == []


def test_trace_writer_bit_stable(tmp_path):
    X = kernels.iterate_solo(0.1, 3.1, 120, 120)[:, None]
    trace = SimTrace.from_states(X)
    write_trace_csv(trace, tmp_path / "a.csv")
    write_trace_csv(trace, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_trace_writer_marks_truncation(tmp_path):
    X = kernels.iterate_solo(0.1, 3.1, 50, 50)[:, None]
    trace = SimTrace.from_states(X)
    trace.diverged = True
    trace.diverged_step = 49
    write_trace_csv(trace, tmp_path / "t.csv")
    assert "TRUNCATED" in (tmp_path / "t.csv").read_text()


def test_fixed_point_rows_ordered(tmp_path):
    rep = fixed_points_single(MapParams(alpha=3.1))
    write_fixed_points_csv(rep, tmp_path / "fp.csv")
    lines = (tmp_path / "fp.csv").read_text().strip().splitlines()
    assert lines[0].startswith("x0,eig0_re")
    first = float(lines[1].split(",")[0])
    second = float(lines[2].split(",")[0])
    assert first == pytest.approx(-0.6774193548387097)
    assert second == 0.0


# --- CLI entry point --------------------------------------------------------

def test_cli_simulate_ok(tmp_path):
    cfg = minimal_sim_cfg(name="cli_ok")
    p = tmp_path / "cli_ok.json"
    p.write_text(dump_config(cfg))
    code = cli.main(["simulate", str(p), "--out", str(tmp_path / "out")])
    assert code == 0
    out_dir = tmp_path / "out" / "cli_ok"
    assert (out_dir / "trace.csv").exists()
    man = json.loads((out_dir / "manifest.json").read_text())
    assert man["flags"] == []


def test_cli_seed_steps_and_set_are_honored(tmp_path):
    cfg = minimal_sim_cfg(name="cli_kw")
    p = tmp_path / "cli_kw.json"
    p.write_text(dump_config(cfg))
    code = cli.main([
        "simulate", str(p), "--out", str(tmp_path / "out"),
        "--seed", "5", "--steps", "13", "--set", "params.devices.0.x0=0.02",
    ])
    assert code == 0
    saved = json.loads((tmp_path / "out" / "cli_kw" / "config.json").read_text())
    assert saved["seed"] == 5
    assert saved["params"]["steps"] == 13
    assert saved["params"]["devices"][0]["x0"] == 0.02
    rows = (tmp_path / "out" / "cli_kw" / "trace.csv").read_text().strip().splitlines()
    assert len(rows) == 1 + 13


def test_cli_rejects_config_errors(tmp_path):
    cfg = minimal_sim_cfg(name="cli_bad")
    cfg["params"]["devices"] = []
    p = tmp_path / "cli_bad.json"
    p.write_text(json.dumps(cfg))
    assert cli.main(["simulate", str(p), "--out", str(tmp_path / "o")]) == 2

    cfg2 = minimal_sim_cfg(name="cli_bad2")
    cfg2["params"]["gravity"] = 9.8
    p2 = tmp_path / "cli_bad2.json"
    p2.write_text(json.dumps(cfg2))
    assert cli.main(["simulate", str(p2), "--out", str(tmp_path / "o")]) == 2

    assert cli.main(["simulate", "no_such_scenario",
                     "--out", str(tmp_path / "o")]) == 2


def test_cli_pipeline_mismatch_rejected(tmp_path):
    cfg = minimal_sim_cfg(name="cli_mismatch")
    p = tmp_path / "cli_mismatch.json"
    p.write_text(dump_config(cfg))
    assert cli.main(["scan", str(p), "--out", str(tmp_path / "o")]) == 2


def test_cli_divergence_keeps_partial_outputs(tmp_path):
    cfg = minimal_sim_cfg(name="cli_div", steps=200)
    cfg["params"]["devices"][0]["alpha"] = 30.0
    cfg["params"]["devices"][0]["k_dac"] = 100.0
    p = tmp_path / "cli_div.json"
    p.write_text(dump_config(cfg))
    code = cli.main(["simulate", str(p), "--out", str(tmp_path / "out")])
    assert code == 3
    out_dir = tmp_path / "out" / "cli_div"
    man = json.loads((out_dir / "manifest.json").read_text())
    assert man["flags"] == ["diverged"]
    assert "TRUNCATED" in (out_dir / "trace.csv").read_text()


def test_cli_analysis_failure(tmp_path):
    cfg = {
        "name": "cli_nocross",
        "pipeline": "analyze",
        "seed": 0,
        "params": {"kind": "pair_bifurcations", "alpha": 3.1,
                   "neg_range": [-0.07, -0.05], "pos_range": [0.05, 0.07]},
    }
    p = tmp_path / "cli_nocross.json"
    p.write_text(json.dumps(cfg))
    assert cli.main(["analyze", str(p), "--out", str(tmp_path / "o")]) == 4


def test_cli_list_scenarios(capsys):
    assert cli.main(["list-scenarios"]) == 0
    lines = [l for l in capsys.readouterr().out.splitlines() if l.strip()]
    assert len(lines) == 20
    names = [l.split()[0] for l in lines]
    assert "fig4c_bifurcation" in names
    assert "currentmode_beat" in names


def test_cli_env_out_root(tmp_path, monkeypatch):
    monkeypatch.setenv("FIELDOSC_OUT", str(tmp_path / "envout"))
    cfg = minimal_sim_cfg(name="cli_env")
    p = tmp_path / "cli_env.json"
    p.write_text(dump_config(cfg))
    assert cli.main(["simulate", str(p)]) == 0
    assert (tmp_path / "envout" / "cli_env" / "trace.csv").exists()


def test_cli_version_subprocess():
    out = subprocess.run(["fieldosc", "--version"], capture_output=True,
                         text=True)
    assert out.returncode == 0
    assert out.stdout.strip().startswith("fieldosc ")
