import json
import subprocess
import sys

import pytest
import yaml

from nmorsim.cli import EXIT_CONFIG, EXIT_RUNTIME, main, parse_values


@pytest.fixture
def s3_yaml(tmp_path, capsys):
    assert main(["preset", "s3", "--emit-config"]) == 0
    text = capsys.readouterr().out
    path = tmp_path / "s3.yaml"
    path.write_text(text)
    return path


def test_emit_config_is_loadable_yaml(s3_yaml):
    cfg = yaml.safe_load(s3_yaml.read_text())
    assert cfg["name"] == "s3" and cfg["atoms"]["ground_decoherence_hz"] == 10.0


def test_run_prints_json_summary(s3_yaml, tmp_path, capsys):
    assert main(["run", str(s3_yaml), "--out-dir", str(tmp_path / "out"), "--seed", "5"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["status"] == "complete" and "manifest.json" not in out["files"]
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["seed"] == 5


def test_preset_run_and_rerun(tmp_path, capsys):
    assert main(["preset", "s3", "--out-dir", str(tmp_path / "a"), "--format", "jsonl"]) == 0
    first = json.loads(capsys.readouterr().out)
    assert all(f.endswith((".jsonl", ".json")) for f in first["files"])
    assert main(["rerun", str(tmp_path / "a"), "--out-dir", str(tmp_path / "b")]) == 0
    assert json.loads(capsys.readouterr().out)["out_dir"] == str(tmp_path / "b")


def test_sweep(s3_yaml, tmp_path, capsys):
    code = main(["sweep", str(s3_yaml), "--param", "atoms.ground_decoherence_hz", "--values", "10,20", "--out-dir", str(tmp_path)])
    assert code == 0
    assert len(json.loads(capsys.readouterr().out)["points"]) == 2


def test_invalid_config_exits_2_with_json(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("name: broken\narms: []\n")
    assert main(["run", str(bad)]) == EXIT_CONFIG
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "config"
    assert any(d["path"] == "seed" for d in err["details"])


def test_unknown_preset_exits_2(capsys):
    assert main(["preset", "bogus"]) == EXIT_CONFIG
    assert json.loads(capsys.readouterr().err)["details"][0]["path"] == "preset"


def test_runtime_failure_exits_1(tmp_path, capsys):
    assert main(["rerun", str(tmp_path / "missing"), "--out-dir", str(tmp_path / "x")]) == EXIT_RUNTIME
    assert json.loads(capsys.readouterr().err)["error"] == "FileNotFoundError"


def test_parse_values():
    assert parse_values("1, 2.5,abc") == [1, 2.5, "abc"]
    assert parse_values("[1e5, 2e5]") == [1e5, 2e5]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "nmorsim.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("nmorsim ")
