import json
import os
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wasep.cli import main
from wasep.config import ConfigError, config_from_dict, config_hash, parse_config
from wasep.output import write_table
from wasep.pipeline import estimate_events


def test_minimal_config_defaults():
    cfg = config_from_dict({"model": {"n": 128, "T": 0.2}})
    assert cfg.drift == {"family": "constant", "value": 0.0}
    assert cfg.profile == {"family": "constant", "value": 0.5}
    assert cfg.weight == {"family": "constant", "value": 1.0}
    assert cfg.replicas == 2000
    assert cfg.snapshot_dt == pytest.approx(0.001)
    assert cfg.eps_ladder == [0.2, 0.1, 0.05]
    assert cfg.grid_m == 256


def test_grid_rounds_to_multiple_of_n():
    cfg = config_from_dict({"model": {"n": 96, "T": 0.1}})
    assert cfg.grid_m % 96 == 0
    assert cfg.grid_m >= 256


def test_validation_errors():
    with pytest.raises(ConfigError, match="eps0"):
        config_from_dict({"model": {"n": 128, "T": 0.2, "eps0": 0.6}})
    with pytest.raises(ConfigError, match="unknown key"):
        config_from_dict({"model": {"n": 128, "T": 0.2}, "run": {"bogus": 1}})
    with pytest.raises(ConfigError, match="unknown section"):
        config_from_dict({"model": {"n": 128, "T": 0.2}, "extras": {}})
    with pytest.raises(ConfigError, match="must provide"):
        config_from_dict({"model": {"n": 128}})
    with pytest.raises(ConfigError, match="family"):
        config_from_dict({"model": {"n": 128, "T": 0.2, "drift": {"family": "spline"}}})
    with pytest.raises(ConfigError, match="moment_order"):
        config_from_dict({"model": {"n": 128, "T": 0.2}, "observables": {"moment_order": 2.5}})
    with pytest.raises(ConfigError, match="suite"):
        config_from_dict({"model": {"n": 128, "T": 0.2}, "verify": {"suites": ["nope"]}})
    # model-level constraint surfaced at parse time
    with pytest.raises(ValueError, match="leaves"):
        config_from_dict({"model": {"n": 128, "T": 0.2,
                                    "profile": {"family": "constant", "value": 0.01}}})


def test_hash_stable_under_reordering():
    a = config_from_dict({"model": {"n": 64, "T": 0.1,
                                    "drift": {"family": "cosine", "amplitude": 0.5, "k": 1}},
                          "run": {"seed": 7, "replicas": 100}})
    b = config_from_dict({"run": {"replicas": 100, "seed": 7},
                          "model": {"T": 0.1, "drift": {"k": 1, "family": "cosine",
                                                        "amplitude": 0.5}, "n": 64}})
    assert config_hash(a) == config_hash(b)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), reps=st.integers(2, 5000))
def test_hash_distinguishes_configs(seed, reps):
    a = config_from_dict({"model": {"n": 64, "T": 0.1}, "run": {"seed": seed, "replicas": reps}})
    b = config_from_dict({"model": {"n": 64, "T": 0.1}, "run": {"seed": seed + 1, "replicas": reps}})
    assert config_hash(a) != config_hash(b)


def test_parse_toml_roundtrip(tmp_path):
    toml = """
[model]
n = 64
T = 0.1
[model.drift]
family = "cosine"
amplitude = 1.0
k = 1
[run]
replicas = 50
seed = 3
[observables]
functions = ["fourier:k=1"]
eps_ladder = [0.2, 0.1]
"""
    p = tmp_path / "exp.toml"
    p.write_text(toml)
    cfg = parse_config(p)
    assert cfg.n == 64
    assert cfg.drift["family"] == "cosine"
    assert cfg.eps_ladder == [0.2, 0.1]
    with pytest.raises(ConfigError, match="not found"):
        parse_config(tmp_path / "missing.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("[model\nn=3")
    with pytest.raises(ConfigError):
        parse_config(bad)


def test_estimate_events_scale():
    cfg = config_from_dict({"model": {"n": 128, "T": 0.2}, "run": {"replicas": 100}})
    # 2 * rho_mean * n^3 * T * M
    assert estimate_events(cfg) == pytest.approx(2 * 0.5 * 128**3 * 0.2 * 100, rel=1e-12)


def test_csv_writer_is_rfc4180(tmp_path):
    path = tmp_path / "t.csv"
    write_table(path, ["a", "b"], [(1, 2.5), (3, 0.1)])
    raw = path.read_bytes()
    assert b"\r\n" in raw
    assert raw.decode("utf-8").splitlines()[0] == "a,b"


def _write_config(tmp_path, extra=""):
    p = tmp_path / "exp.toml"
    p.write_text(
        """
[model]
n = 32
T = 0.02
[run]
replicas = 12
seed = 5
snapshot_dt = 0.01
[observables]
functions = ["fourier:k=1"]
eps_ladder = [0.25]
[oracle]
grid = 32
quad_nodes = 4
spde_enabled = false
store_slices = 129
"""
        + extra
    )
    return p


def test_cli_simulate_and_determinism(tmp_path, monkeypatch):
    monkeypatch.setenv("WASEP_OUT_DIR", str(tmp_path / "out"))
    cfg_path = _write_config(tmp_path)
    assert main(["simulate", "--config", str(cfg_path)]) == 0
    out_dirs = list((tmp_path / "out").iterdir())
    assert len(out_dirs) == 1
    summary1 = (out_dirs[0] / "summary.json").read_bytes()
    manifest = json.loads((out_dirs[0] / "manifest.json").read_text())
    assert manifest["config"]["model"]["n"] == 32
    assert (out_dirs[0] / "tables" / "observables.csv").exists()
    # byte-identical rerun
    assert main(["simulate", "--config", str(cfg_path)]) == 0
    assert (out_dirs[0] / "summary.json").read_bytes() == summary1
    # keys sorted in emitted JSON
    payload = json.loads(summary1)
    assert list(payload) == sorted(payload)


def test_cli_seed_override_changes_run_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("WASEP_OUT_DIR", str(tmp_path / "out"))
    cfg_path = _write_config(tmp_path)
    assert main(["simulate", "--config", str(cfg_path)]) == 0
    assert main(["simulate", "--config", str(cfg_path), "--seed", "99"]) == 0
    assert len(list((tmp_path / "out").iterdir())) == 2


def test_cli_hydro_and_oracle(tmp_path, monkeypatch):
    monkeypatch.setenv("WASEP_OUT_DIR", str(tmp_path / "out"))
    cfg_path = _write_config(tmp_path)
    assert main(["hydro", "--config", str(cfg_path)]) == 0
    assert main(["oracle", "--config", str(cfg_path)]) == 0
    d = next((tmp_path / "out").iterdir())
    assert (d / "fields" / "density.csv").exists()
    oracle = json.loads((d / "oracle.json").read_text())
    assert "var_z" in oracle and "extrapolated" in oracle["var_z"]
    # density cache reused on the second call
    assert main(["hydro", "--config", str(cfg_path)]) == 0


def test_cli_replacement_scan(tmp_path, monkeypatch):
    monkeypatch.setenv("WASEP_OUT_DIR", str(tmp_path / "out"))
    cfg_path = _write_config(tmp_path)
    # a single-width ladder writes the table but skips the slope fit
    assert main(["replacement-scan", "--config", str(cfg_path)]) == 0
    p = tmp_path / "scan.toml"
    p.write_text(
        """
[model]
n = 64
T = 0.02
[run]
replicas = 40
seed = 5
snapshot_dt = 0.002
[observables]
eps_ladder = [0.4, 0.25, 0.125]
[oracle]
grid = 64
spde_enabled = false
store_slices = 129
"""
    )
    assert main(["replacement-scan", "--config", str(p)]) == 0
    payloads = [
        json.loads((x / "replacement_scan.json").read_text())
        for x in (tmp_path / "out").iterdir()
        if (x / "replacement_scan.json").exists()
    ]
    three = [pl for pl in payloads if len(pl["eps"]) == 3]
    assert len(three) == 1
    assert three[0]["fit"] is not None
    one = [pl for pl in payloads if len(pl["eps"]) == 1]
    assert one and one[0]["fit"] is None


def test_cli_verify_guards(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("WASEP_OUT_DIR", str(tmp_path / "out"))
    cfg_path = _write_config(tmp_path)
    # no suites selected: warn, succeed
    assert main(["verify", "--config", str(cfg_path)]) == 0
    assert "no suites" in capsys.readouterr().err
    # unknown suite name rejected
    assert main(["verify", "--config", str(cfg_path), "--suite", "bogus"]) == 2
    # resource guard refuses heavy suites under a tiny budget
    tiny = tmp_path / "tiny.toml"
    tiny.write_text(
        """
[model]
n = 32
T = 0.02
[verify]
max_events = 1000.0
"""
    )
    assert main(["verify", "--config", str(tiny), "--suite", "field-clt"]) == 2
    assert "max_events" in capsys.readouterr().err


def test_cli_config_error_exit_code(tmp_path):
    p = tmp_path / "broken.toml"
    p.write_text("[model]\nn = 128\n")
    assert main(["simulate", "--config", str(p)]) == 2
