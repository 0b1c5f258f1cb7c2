"""
Run artifacts for the MFG solver
Versioned CSV tables written through pandas plus the JSON run manifest
"""

import json
from pathlib import Path
from typing import Any, Dict, List

import numpy as np
import pandas as pd

from . import __version__
from .errors import ArtifactIOError, MFGError
from .fbsde import SolutionField, SolverDiagnostics, StabilityReport
from .logger import get_logger, to_jsonable
from .lq_oracle import OracleComparison
from .nash import REPORT_SERIES, NashReport
from .stochastics import TimeGrid


# ============================================================================
# Logger
# ============================================================================

logger = get_logger("mfg_solver.export")

CSV_VERSION = "mfg-csv v1"
FLOAT_FORMAT = "%.17g"
MAJOR_PARTICLE = -1


# ============================================================================
# CSV Writing
# ============================================================================

def ensure_output_dir(path: Path) -> Path:
    """
    Raises:
        ArtifactIOError: If the directory cannot be created
    """
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ArtifactIOError(f"Cannot create output directory: {path}", {"path": str(path), "reason": str(e)}) from e
    return path


def write_csv(frame: pd.DataFrame, path: Path, schema: str) -> Path:
    """
    Write a table behind a `# mfg-csv v1 <schema>` header line

    Floats are written with 17 significant digits so reruns are byte-identical.

    Raises:
        ArtifactIOError: On any filesystem failure
    """
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(f"# {CSV_VERSION} {schema}\n")
            frame.to_csv(f, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    except OSError as e:
        raise ArtifactIOError(f"Failed to write {path.name}", {"path": str(path), "reason": str(e)}) from e
    logger.debug("Wrote table", extra={"extra": {"path": str(path), "rows": len(frame)}})
    return path


def read_csv(path: Path) -> pd.DataFrame:
    """Read back a table written by write_csv (the header line is skipped)"""
    try:
        return pd.read_csv(path, comment="#")
    except (OSError, pd.errors.ParserError) as e:
        raise ArtifactIOError(f"Failed to read {Path(path).name}", {"path": str(path), "reason": str(e)}) from e


# ============================================================================
# Solution Fields
# ============================================================================

def quantity_frame(grid: TimeGrid, values: np.ndarray) -> pd.DataFrame:
    """
    Long table of one path quantity

    Major arrays (K, steps) get particle = -1; minor arrays are (K, M, steps).
    Rows are ordered by scenario, particle, step.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim == 2:
        values = values[:, None, :]
        particles = np.array([MAJOR_PARTICLE])
    else:
        particles = np.arange(values.shape[1])
    K, M, steps = values.shape
    scenario, particle, step = np.meshgrid(np.arange(K), particles, np.arange(steps), indexing="ij")
    return pd.DataFrame({
        "scenario": scenario.ravel(),
        "particle": particle.ravel(),
        "step": step.ravel(),
        "time": grid.knots[step.ravel()],
        "value": values.ravel(),
    })


def write_solution(field: SolutionField, out_dir: Path, prefix: str = "solution") -> List[Path]:
    """One `<prefix>_<quantity>.csv` per stored quantity"""
    out_dir = ensure_output_dir(out_dir)
    return [
        write_csv(quantity_frame(field.grid, values), out_dir / f"{prefix}_{name}.csv", f"{prefix}.{name}")
        for name, values in field.quantities().items()
    ]


def residual_frame(diagnostics: SolverDiagnostics) -> pd.DataFrame:
    residuals = list(diagnostics.outer_residuals)
    return pd.DataFrame({
        "method": [diagnostics.method] * len(residuals),
        "iteration": np.arange(1, len(residuals) + 1),
        "residual": residuals,
    })


def continuation_frame(diagnostics: SolverDiagnostics) -> pd.DataFrame:
    return pd.DataFrame(
        [(r.gamma, r.step, r.iterations, r.contraction_ratio) for r in diagnostics.continuation],
        columns=["gamma", "step", "iterations", "contraction_ratio"],
    )


def write_residual_history(diagnostics: SolverDiagnostics, out_dir: Path) -> List[Path]:
    """Outer residuals per iteration, plus the per-gamma continuation records when present"""
    out_dir = ensure_output_dir(out_dir)
    paths = [write_csv(residual_frame(diagnostics), out_dir / f"residuals_{diagnostics.method}.csv", "residuals")]
    if diagnostics.continuation:
        paths.append(write_csv(continuation_frame(diagnostics), out_dir / "continuation.csv", "continuation"))
    return paths


def write_stability(report: StabilityReport, out_dir: Path) -> Path:
    frame = pd.DataFrame({"h": report.hs, "input_norm": report.input_norms, "distance": report.distances})
    return write_csv(frame, ensure_output_dir(out_dir) / "stability.csv", "stability")


# ============================================================================
# Oracle Comparison
# ============================================================================

def comparison_frame(comparison: OracleComparison) -> pd.DataFrame:
    rows = [{"quantity": name, **errors} for name, errors in comparison.per_quantity.items()]
    return pd.DataFrame(rows, columns=["quantity", "max_abs", "max_rel", "mean_rel"])


def write_comparison(comparison: OracleComparison, out_dir: Path, label: str) -> Path:
    path = ensure_output_dir(out_dir) / f"oracle_errors_{label}.csv"
    return write_csv(comparison_frame(comparison), path, "oracle_errors")


# ============================================================================
# Nash Report
# ============================================================================

NASH_COLUMNS = [
    "N", "chaos_gap", "chaos_stderr", "gap_major", "gap_major_stderr", "gap_minor", "gap_minor_stderr",
    "best_major", "best_minor",
]


def nash_frame(report: NashReport) -> pd.DataFrame:
    return pd.DataFrame([vars(row) for row in report.rows], columns=NASH_COLUMNS)


def fits_frame(report: NashReport) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {"series": name, **vars(fit)}
            for name, fit in sorted(report.fits.items())
        ],
        columns=["series", "slope", "intercept", "ci_low", "ci_high", "n_points", "degenerate"],
    )


def plot_frame(report: NashReport) -> pd.DataFrame:
    """
    Log-log pairs per series with the fitted line evaluated at the same abscissae

    Non-positive estimates have no logarithm and are written as NaN.
    """
    ns = np.asarray(report.ns, dtype=float)
    log_n = np.log(ns) if ns.size else ns
    frames = []
    for name in REPORT_SERIES:
        values = np.asarray(report.series(name), dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            log_values = np.where(values > 0.0, np.log(np.where(values > 0.0, values, 1.0)), np.nan)
        fit = report.fits.get(name)
        fitted = fit.intercept + fit.slope * log_n if fit is not None and not fit.degenerate else np.full_like(log_n, np.nan)
        frames.append(pd.DataFrame({
            "series": name,
            "N": ns.astype(int),
            "log_N": log_n,
            "log_value": log_values,
            "fitted_log_value": fitted,
        }))
    return pd.concat(frames, ignore_index=True)


def write_nash_report(report: NashReport, out_dir: Path, partial: bool = False) -> List[Path]:
    """nash.csv, nash_fits.csv and nash_plot.csv; partial reports are written as nash_partial*.csv"""
    out_dir = ensure_output_dir(out_dir)
    stem = "nash_partial" if partial else "nash"
    return [
        write_csv(nash_frame(report), out_dir / f"{stem}.csv", "nash"),
        write_csv(fits_frame(report), out_dir / f"{stem}_fits.csv", "nash_fits"),
        write_csv(plot_frame(report), out_dir / f"{stem}_plot.csv", "nash_plot"),
    ]


# ============================================================================
# Manifest
# ============================================================================

def build_manifest(
    command: str,
    config: Dict[str, Any],
    status: str,
    exit_code: int,
    results: Dict[str, Any] | None = None,
    artifacts: List[Path] | None = None,
    error: MFGError | None = None
) -> Dict[str, Any]:
    """Run manifest; contains no timestamps or host data so identical runs give identical files"""
    manifest: Dict[str, Any] = {
        "version": __version__,
        "csv_version": CSV_VERSION,
        "command": command,
        "status": status,
        "exit_code": exit_code,
        "config": config,
        "results": results or {},
        "artifacts": sorted(Path(p).name for p in artifacts or []),
    }
    if error is not None:
        manifest.update(error.to_dict())
    return to_jsonable(manifest, max_items=1_000_000)


def write_manifest(out_dir: Path, manifest: Dict[str, Any]) -> Path:
    """
    Raises:
        ArtifactIOError: If the manifest cannot be written
    """
    path = ensure_output_dir(out_dir) / "manifest.json"
    try:
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as e:
        raise ArtifactIOError("Failed to write run manifest", {"path": str(path), "reason": str(e)}) from e
    return path
