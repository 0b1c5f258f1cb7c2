from __future__ import annotations

import json
from pathlib import Path

import pytest

from src.cli import main

SMALL = ["--set", "grid.n_steps=4", "--set", "ensemble.n_scenarios=8", "--set", "ensemble.n_particles=16",
         "--set", "validation.sample_budget=32"]


def _run(command: str, model: str, out: Path, *extra: str) -> int:
    return main([command, "--set", f"model=catalog:{model}", "--out", str(out), *SMALL, *extra])


def _manifest(out: Path) -> dict:
    return json.loads((out / "manifest.json").read_text())


def test_validate_writes_a_manifest(tmp_path: Path) -> None:
    assert _run("validate", "lq_weak", tmp_path) == 0
    manifest = _manifest(tmp_path)
    assert manifest["status"] == "ok"
    assert manifest["command"] == "validate"
    assert manifest["results"]["validation"]
    assert "error" not in manifest


def test_missing_config_is_a_config_error(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    code = main(["solve", "--config", str(tmp_path / "absent.toml"), "--out", str(tmp_path / "out")])
    assert code == 2
    assert json.loads(capsys.readouterr().err)["error"]["code"] == "config_error"
    assert not (tmp_path / "out" / "manifest.json").exists()


def test_too_few_agent_counts(tmp_path: Path) -> None:
    assert _run("nash", "trivial", tmp_path, "--set", "nash.ns=[2, 4]") == 2


def test_oracle_check_needs_an_lq_model(tmp_path: Path) -> None:
    assert _run("oracle-check", "smooth_weak", tmp_path) == 2
    manifest = _manifest(tmp_path)
    assert manifest["status"] == "failed"
    assert manifest["error"]["code"] == "oracle_unavailable"


def test_solve_is_reproducible(tmp_path: Path) -> None:
    first, second = tmp_path / "a", tmp_path / "b"
    assert _run("solve", "trivial", first, "--seed", "5") == 0
    assert _run("solve", "trivial", second, "--seed", "5") == 0

    manifest = _manifest(first)
    assert manifest["exit_code"] == 0
    assert "picard_X0.csv" in manifest["artifacts"]
    assert "residuals_picard.csv" in manifest["artifacts"]
    for name in manifest["artifacts"]:
        assert (first / name).read_bytes() == (second / name).read_bytes(), name
    assert (first / "run.log").exists()


def test_nash_on_the_trivial_instance(tmp_path: Path) -> None:
    code = _run("nash", "trivial", tmp_path, "--set", "nash.ns=[2, 3, 4]", "--set", "nash.n_replications=4",
                "--set", "nash.reference_particles=16")
    assert code == 0
    manifest = _manifest(tmp_path)
    assert manifest["results"]["nash"]["ns"] == [2, 3, 4]
    assert {"nash.csv", "nash_fits.csv", "nash_plot.csv"} <= set(manifest["artifacts"])


def test_oracle_check_records_the_riccati_self_check(tmp_path: Path) -> None:
    assert _run("oracle-check", "trivial", tmp_path) in (0, 4)
    oracle = _manifest(tmp_path)["results"]["oracle"]
    assert oracle["riccati_residual_ok"] is True
    assert oracle["riccati_residual_threshold"] == 1e-8
    assert oracle["riccati_residual"] <= oracle["riccati_residual_threshold"]
