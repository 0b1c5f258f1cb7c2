from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from src.errors import ArtifactIOError, OracleUnavailableError
from src.export import (
    CSV_VERSION,
    build_manifest,
    fits_frame,
    nash_frame,
    plot_frame,
    quantity_frame,
    read_csv,
    write_csv,
    write_manifest,
    write_nash_report,
)
from src.nash import NashReport, NashRow, fit_scaling
from src.stochastics import TimeGrid


def _report() -> NashReport:
    ns = [4, 8, 16]
    chaos = [0.25, 0.125, 0.0625]
    rows = [NashRow(n, c, 0.01, 0.0, 0.0, g, 0.001, "zero", "shift_+0.1")
            for n, c, g in zip(ns, chaos, [0.1, -0.0, 0.02])]
    fits = {
        "chaos_gap": fit_scaling(ns, chaos),
        "gap_major": fit_scaling(ns, [0.0, 0.0, 0.0]),
        "gap_minor": fit_scaling(ns, [0.1, 0.0, 0.02]),
    }
    return NashReport(rows=rows, fits=fits, minor_agent=1)


def test_major_quantities_use_particle_minus_one() -> None:
    grid = TimeGrid(1.0, 2)
    frame = quantity_frame(grid, np.arange(6.0).reshape(2, 3))
    assert list(frame.columns) == ["scenario", "particle", "step", "time", "value"]
    assert len(frame) == 6
    assert set(frame["particle"]) == {-1}
    assert list(frame["time"][:3]) == [0.0, 0.5, 1.0]


def test_minor_quantities_are_ordered_by_scenario_particle_step() -> None:
    grid = TimeGrid(1.0, 1)
    values = np.arange(8.0).reshape(2, 2, 2)
    frame = quantity_frame(grid, values)
    assert len(frame) == 8
    assert list(frame["value"]) == list(values.ravel())
    assert list(frame.loc[5, ["scenario", "particle", "step"]]) == [1, 0, 1]


def test_csv_has_a_versioned_header_and_reads_back(tmp_path: Path) -> None:
    frame = quantity_frame(TimeGrid(1.0, 3), np.array([[0.1, 1.0 / 3.0, 2.0, np.pi]]))
    path = write_csv(frame, tmp_path / "x.csv", "solution.X0")
    assert path.read_text().splitlines()[0] == f"# {CSV_VERSION} solution.X0"
    back = read_csv(path)
    np.testing.assert_allclose(back["value"].to_numpy(), frame["value"].to_numpy(), rtol=1e-15)
    assert list(back["particle"]) == [-1] * 4


def test_csv_write_failure_is_an_io_error(tmp_path: Path) -> None:
    with pytest.raises(ArtifactIOError):
        write_csv(quantity_frame(TimeGrid(1.0, 1), np.zeros((1, 2))), tmp_path / "missing" / "x.csv", "x")


def test_nash_tables(tmp_path: Path) -> None:
    report = _report()
    assert list(nash_frame(report)["N"]) == [4, 8, 16]
    fits = fits_frame(report).set_index("series")
    assert fits.loc["chaos_gap", "slope"] == pytest.approx(-1.0)
    assert bool(fits.loc["gap_major", "degenerate"])

    paths = write_nash_report(report, tmp_path, partial=True)
    assert [p.name for p in paths] == ["nash_partial.csv", "nash_partial_fits.csv", "nash_partial_plot.csv"]


def test_plot_table_has_no_logarithm_for_non_positive_values() -> None:
    plot = plot_frame(_report())
    minor = plot[plot["series"] == "gap_minor"]
    assert np.isnan(minor["log_value"].iloc[1])
    assert minor["log_value"].iloc[0] == pytest.approx(np.log(0.1))
    assert minor["fitted_log_value"].isna().all()
    chaos = plot[plot["series"] == "chaos_gap"]
    np.testing.assert_allclose(chaos["fitted_log_value"], chaos["log_value"])


def test_manifest_is_deterministic_and_carries_the_error(tmp_path: Path) -> None:
    error = OracleUnavailableError("no oracle", {"model": "smooth_weak"})
    kwargs = dict(
        command="oracle-check",
        config={"seed": 1},
        status="failed",
        exit_code=error.exit_code,
        results={"residual": np.float64(0.5), "curve": np.array([1.0, np.inf])},
        artifacts=[tmp_path / "b.csv", tmp_path / "a.csv"],
        error=error,
    )
    first = write_manifest(tmp_path / "one", build_manifest(**kwargs)).read_text()
    second = write_manifest(tmp_path / "two", build_manifest(**kwargs)).read_text()
    assert first == second

    manifest = json.loads(first)
    assert manifest["artifacts"] == ["a.csv", "b.csv"]
    assert manifest["error"]["code"] == "oracle_unavailable"
    assert manifest["exit_code"] == 2
    assert manifest["results"]["curve"] == [1.0, "inf"]
    assert manifest["csv_version"] == CSV_VERSION
