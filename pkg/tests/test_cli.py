import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from triple_scatter import cli
from triple_scatter.errors import ConfigError
from triple_scatter.hardy import Grid, ModelVector, SymbolTrack
from triple_scatter.weyl import ExtensionParams, StarGraph

BASE = {"model": {"kind": "StarGraph", "n": 2}, "kappa": "diag:[1, -1]",
        "k_grid": {"min": 0.1, "max": 10, "count": 12}}


def write(tmp_path, data, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data) if not isinstance(data, str) else data)
    return path


def run(tmp_path, command, data, *extra):
    out = tmp_path / "out"
    code = cli.main([command, "--config", str(write(tmp_path, data)), "--out", str(out), *extra])
    return code, out


def test_scan_zero_preset_gives_identity_rows(tmp_path):
    code, out = run(tmp_path, "scan", {**BASE, "kappa": "zero"})
    assert code == 0
    rows = list(csv.DictReader((out / "scattering.csv").open()))
    assert len(rows) == 12
    for row in rows:
        assert float(row["sigma_re_0_0"]) == 1.0 and float(row["sigma_re_1_1"]) == 1.0
        assert float(row["sigma_re_0_1"]) == 0.0 and float(row["sigma_im_0_0"]) == 0.0
        assert row["skipped"] == "0"
    data = json.loads((out / "scattering.json").read_text())
    assert len(data["samples"]) == 12


def test_scan_with_masked_pole_exits_two(tmp_path):
    config = {"model": {"kind": "LeadRational", "W": [[1]], "poles": [{"lambda": 1.0, "A": [[1]]}]},
              "kappa": [[[0.5, 0]]], "k_grid": {"min": 0.5, "max": 1.5, "count": 3}}
    code, out = run(tmp_path, "scan", config)
    assert code == 2
    rows = list(csv.DictReader((out / "scattering.csv").open()))
    assert [r["reason"] for r in rows] == ["", "AtPole", ""]


def test_malformed_kappa_writes_nothing(tmp_path, capsys):
    code, out = run(tmp_path, "scan", {**BASE, "kappa": [[[1, 0], [0, 0]]]})
    assert code == 1
    assert not out.exists()
    assert "field 'kappa'" in capsys.readouterr().err


def test_kappa_dimension_must_match_model(tmp_path):
    code, _ = run(tmp_path, "scan", {**BASE, "kappa": "diag:[1, 2, 3]"})
    assert code == 1


def test_empty_suites_exit_one(tmp_path):
    code, out = run(tmp_path, "verify", {**BASE, "suites": []})
    assert code == 1 and not out.exists()


def test_unknown_fields_warn_or_fail(tmp_path, caplog):
    data = {**BASE, "kapa": 1}
    code, _ = run(tmp_path, "scan", data)
    assert code == 0
    assert "kapa" in caplog.text
    code, _ = run(tmp_path, "scan", data, "--strict")
    assert code == 1


def test_json_syntax_error_reports_line(tmp_path, capsys):
    path = write(tmp_path, '{"model": {"kind": "StarGraph",\n "n": 2,, }')
    assert cli.main(["scan", "--config", str(path)]) == 1
    assert "config.json:2:" in capsys.readouterr().err


def test_schema_errors_name_the_field():
    with pytest.raises(ConfigError, match="k_grid.count"):
        cli.build_config({**BASE, "k_grid": {"min": 0, "max": 1, "count": 0}})
    with pytest.raises(ConfigError, match="model"):
        cli.build_config({**BASE, "model": {"kind": "StarGraph"}})
    with pytest.raises(ConfigError, match="k_grid.min"):
        cli.build_config({**BASE, "k_grid": {"min": 0, "max": 1, "count": 3, "spacing": "log"}})
    with pytest.raises(ConfigError, match="hardy"):
        cli.build_config({**BASE, "hardy": {"N": 1000}})


def test_presets_and_defaults():
    config = cli.build_config({**BASE, "kappa": "iI"}, seed=9)
    assert np.allclose(config.ext.kappa, 1j * np.eye(2))
    assert config.ext.is_sqrt2 and config.seed == 9
    assert config.suites == list(cli.SUITES)
    assert (config.hardy_N, config.hardy_L) == (4096, 50.0)
    log = cli.build_config({**BASE, "k_grid": {"min": 0.1, "max": 10, "count": 3, "spacing": "log"}})
    assert np.allclose(log.k_grid, [0.1, 1.0, 10.0])
    alpha = cli.build_config({**BASE, "alpha": [[[2, 0], [0, 0]], [[0, 0], [1, 0]]]})
    assert np.allclose(alpha.ext.b_kappa, np.diag([2.0, -0.5]))


def test_config_hash_ignores_output_location():
    a = cli.build_config(BASE, out_dir="x")
    b = cli.build_config(BASE, out_dir="y")
    c = cli.build_config(BASE, seed=1)
    assert a.config_hash == b.config_hash != c.config_hash


def test_verify_writes_reports_and_flags_sabotage(tmp_path):
    data = {**BASE, "suites": ["oracle-equivalence", "cayley"], "debug": {"corrupt_kappa_sign": True}}
    code, out = run(tmp_path, "verify", data)
    assert code == 3
    report = json.loads((out / "report.json").read_text())
    assert report["pass"] is False
    assert [s["name"] for s in report["suites"]] == ["oracle-equivalence", "cayley"]
    oracle = report["suites"][0]["checks"][1]
    assert oracle["tag"] == "sigma-vs-plane-wave-oracle" and oracle["residual"] > 0.1
    assert "FAIL" in (out / "report.txt").read_text()


def test_verify_reports_skipped_points(tmp_path):
    data = {**BASE, "k_grid": {"min": 0.0, "max": 2.0, "count": 3}, "suites": ["weight-identity"]}
    code, out = run(tmp_path, "verify", data)
    report = json.loads((out / "report.json").read_text())
    assert code == 0
    assert {"suite": "weight-identity", "tag": "weight-identity", "point": 0.0,
            "reason": "NonConvergent"} in report["skipped"]


def test_corpus_round_trip(tmp_path):
    data = {**BASE, "hardy": {"N": 1024, "L": 50.0}}
    code, out = run(tmp_path, "corpus", data, "--seed", "4")
    assert code == 0
    doc = json.loads((out / "corpus.json").read_text())
    assert doc["seed"] == 4 and len(doc["vectors"]["rational"]) == 3
    ext = ExtensionParams.sqrt2(np.diag([1.0, -1.0]))
    track = SymbolTrack.from_model(Grid(50.0, 1024), ext, StarGraph(2))
    v = ModelVector.from_dict(doc["vectors"]["gaussian"][0], track)
    assert v.l2_norm() > 0


def test_schema_command_and_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "triple_scatter", "schema"], capture_output=True, text=True,
                          check=True)
    schema = json.loads(proc.stdout)
    assert schema["properties"]["kappa"] and "model" in schema["required"]


def test_log_level_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("TRIPLE_SCATTER_LOG", "chatty")
    code, _ = run(tmp_path, "scan", BASE)
    assert code == 0
