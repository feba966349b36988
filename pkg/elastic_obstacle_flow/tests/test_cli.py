import json
import math

import pytest
from typer.testing import CliRunner

from elastic_obstacle_flow.cli import app

runner = CliRunner()


def documents(output):
    return [json.loads(line) for line in output.splitlines() if line.startswith("{")]


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "small.json"
    path.write_text(json.dumps({
        "lambda": 0.0,
        "m": 16,
        "n": 3,
        "T": 1e-3,
        "obstacle": {"kind": "symmetric_cone", "height": -0.5},
        "u0": {"kind": "sine", "amplitude": 0.1},
    }))
    return path


# ----------------------------
# Reference objects
# ----------------------------

def test_thresholds():
    result = runner.invoke(app, ["thresholds"])
    assert result.exit_code == 0
    document = documents(result.output)[-1]
    assert document["h_star"] == pytest.approx(0.83462, abs=5e-5)
    assert document["h_star_clamped"] == pytest.approx(1.1890, abs=1e-3)
    assert document["c0"] * document["h_star"] == pytest.approx(2.0, abs=1e-12)


def test_stationary_profile(tmp_path):
    out = tmp_path / "stationary.csv"
    result = runner.invoke(app, ["stationary", "0.4", "64", "--out", str(out)])
    assert result.exit_code == 0
    assert documents(result.output)[-1]["tip"] == 0.4
    lines = out.read_text().splitlines()
    assert lines[0] == "x,u"
    assert len(lines) == 66


def test_stationary_out_of_range(tmp_path):
    result = runner.invoke(app, ["stationary", "0.9", "64", "--out", str(tmp_path / "s.csv")])
    assert result.exit_code == 2
    assert documents(result.output)[-1]["error"] == "DomainError"


def test_elastica(tmp_path):
    out = tmp_path / "elastica.csv"
    result = runner.invoke(app, ["elastica", "--out", str(out)])
    assert result.exit_code == 0
    document = documents(result.output)[-1]
    assert document["rows"] == 512
    assert document["turning"] == pytest.approx(-math.pi, abs=1e-7)
    assert len(out.read_text().splitlines()) == 513


# ----------------------------
# Runs and checks
# ----------------------------

def test_run_and_check(config_path, tmp_path):
    out = tmp_path / "run"
    result = runner.invoke(app, ["run", str(config_path), "--out", str(out)])
    assert result.exit_code == 0
    report = documents(result.output)[-1]
    assert report["status"] == "COMPLETED"
    assert report["steps"] == 3
    assert (out / "ledger.csv").exists()

    checked = runner.invoke(app, ["check", str(out)])
    assert checked.exit_code == 0
    assert documents(checked.output)[-1]["passed"] is True
    assert (out / "verdict.json").exists()


def test_run_overrides(config_path, tmp_path):
    out = tmp_path / "run"
    result = runner.invoke(app, ["run", str(config_path), "--n", "2", "--lambda", "0.5", "--out", str(out)])
    assert result.exit_code == 0
    assert documents(result.output)[-1]["steps"] == 2
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["params"]["lambda"] == 0.5
    assert manifest["config"]["output_dir"] == str(out)


def test_several_configs_get_their_own_directories(config_path, tmp_path):
    other = tmp_path / "other.json"
    other.write_text(config_path.read_text())
    out = tmp_path / "runs"
    result = runner.invoke(app, ["run", str(config_path), str(other), "--out", str(out), "--workers", "2"])
    assert result.exit_code == 0
    assert len(documents(result.output)) >= 2
    assert (out / "small" / "ledger.csv").read_bytes() == (out / "other" / "ledger.csv").read_bytes()
    manifest = json.loads((out / "other" / "manifest.json").read_text())
    assert manifest["config"]["output_dir"] == str(out / "other")


def test_invalid_config_exits_with_validation_code(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"m": 16, "n": 3, "obstacle": {"kind": "symmetric_cone", "height": 0.3, "base": 0.0},
                                "u0": {"kind": "sine"}}))
    result = runner.invoke(app, ["run", str(path)])
    assert result.exit_code == 2
    document = documents(result.output)[-1]
    assert document["error"] == "ConfigurationError"
    assert "psi(0) < 0" in document["message"]


def test_flat_datum_with_automatic_horizon(tmp_path):
    path = tmp_path / "flat.json"
    path.write_text(json.dumps({"m": 16, "n": 3, "T": "auto", "obstacle": {"kind": "symmetric_cone", "height": -0.5},
                                "u0": {"kind": "flat"}}))
    result = runner.invoke(app, ["run", str(path), "--out", str(tmp_path / "run")])
    assert result.exit_code == 2
    assert documents(result.output)[-1]["error"] == "DegenerateDatumError"


def test_check_without_bundle(tmp_path):
    result = runner.invoke(app, ["check", str(tmp_path)])
    assert result.exit_code == 2
    assert documents(result.output)[-1]["error"] == "ConfigurationError"


def test_resting_run_passes_the_check(tmp_path):
    path = tmp_path / "resting.json"
    path.write_text(json.dumps({"m": 64, "n": 5, "T": "auto", "obstacle": {"kind": "symmetric_cone", "height": 0.4},
                                "u0": {"kind": "stationary"}}))
    out = tmp_path / "run"
    result = runner.invoke(app, ["run", str(path), "--out", str(out)])
    assert result.exit_code == 0
    assert documents(result.output)[-1]["status"] == "COMPLETED"

    checked = runner.invoke(app, ["check", str(out)])
    assert checked.exit_code == 0
    assert documents(checked.output)[-1]["passed"] is True
