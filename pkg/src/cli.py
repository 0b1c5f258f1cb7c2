"""
Command-line orchestration of the MFG solver
Subcommands solve, oracle-check, nash and validate; every run leaves CSV tables, logs and a manifest
"""

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List

from .catalog import load_model
from .config import RunConfig, get_settings, load_run_config
from .errors import (
    EXIT_INTERNAL,
    EXIT_OK,
    AssumptionViolation,
    MFGError,
    OracleMismatchError,
    OracleUnavailableError,
    ScalingAbortedError,
    SizeMismatchError,
)
from .export import (
    build_manifest,
    write_comparison,
    write_manifest,
    write_nash_report,
    write_residual_history,
    write_solution,
    write_stability,
)
from .fbsde import SolutionField, snorm_distance, solve_continuation, solve_coupled_picard, stability_sweep
from .logger import get_logger, setup_logger, to_jsonable
from .lq_oracle import (
    RESIDUAL_WARNING,
    compare_fields,
    lq_source_of,
    oracle_field,
    predicted_costs,
    solve_riccati,
)
from .model import ModelSpec, coupling_budget, validate_assumptions
from .nash import scaling_report
from .stochastics import PathBundle, TimeGrid, dump_bundle, load_bundle, sample_bundle
from .worker_pool import configure_worker_pool, get_worker_pool


# ============================================================================
# Logger
# ============================================================================

logger = get_logger("mfg_solver.cli")


# ============================================================================
# Run Context
# ============================================================================

@dataclass
class RunContext:
    """Artifacts and results gathered by a command; written to the manifest even on failure"""
    command: str
    config: RunConfig
    results: Dict[str, Any] = field(default_factory=dict)
    artifacts: List[Path] = field(default_factory=list)

    @property
    def out_dir(self) -> Path:
        return self.config.output_dir


def _prepare(ctx: RunContext, spec: ModelSpec | None = None) -> tuple[ModelSpec, PathBundle]:
    """
    Load the model and draw (or replay) the bundle of the run

    Raises:
        SizeMismatchError: If a replayed bundle does not live on the configured grid
    """
    cfg = ctx.config
    spec = spec if spec is not None else load_model(cfg.model)
    grid = TimeGrid(spec.horizon, cfg.grid.n_steps)
    ctx.results["model"] = spec.describe()
    ctx.results["coupling_budget"] = coupling_budget(spec)

    if cfg.replay_bundle is not None:
        bundle = load_bundle(cfg.replay_bundle)
        if bundle.grid != grid:
            raise SizeMismatchError(
                "Replayed bundle lives on another grid",
                {"bundle": [bundle.grid.horizon, bundle.grid.n_steps], "config": [grid.horizon, grid.n_steps]}
            )
    else:
        bundle = sample_bundle(
            grid, cfg.ensemble.n_scenarios, cfg.ensemble.n_particles, spec.init_major, spec.init_minor, cfg.seed
        )
    if cfg.dump_bundle:
        path = ctx.out_dir / "bundle.bin"
        dump_bundle(bundle, path)
        ctx.artifacts.append(path)
    return spec, bundle


def _validate(ctx: RunContext, spec: ModelSpec) -> None:
    """
    Raises:
        AssumptionViolation: If any spot check fails
    """
    cfg = ctx.config.validation
    report = validate_assumptions(spec, cfg.sample_budget, cfg.tolerance, ctx.config.seed, cfg.box)
    ctx.results["validation"] = report.summary()
    if not report.passed:
        raise AssumptionViolation(
            f"Model {spec.name} fails {len(report.failures())} assumption checks",
            {"failures": [check.name for check in report.failures()]}
        )


def _solve(ctx: RunContext, spec: ModelSpec, bundle: PathBundle, write: bool = True) -> Dict[str, SolutionField]:
    """Run the configured solver(s); with method 'both' the Picard field is listed first"""
    cfg = ctx.config.solver
    methods = ["picard", "continuation"] if cfg.method == "both" else [cfg.method]
    fields: Dict[str, SolutionField] = {}
    for method in methods:
        if method == "picard":
            fields[method] = solve_coupled_picard(spec, bundle, cfg)
        else:
            fields[method] = solve_continuation(spec, bundle, cfg)
        ctx.results.setdefault("solvers", {})[method] = fields[method].diagnostics.to_dict()
        if write:
            ctx.artifacts += write_solution(fields[method], ctx.out_dir, prefix=method)
            ctx.artifacts += write_residual_history(fields[method].diagnostics, ctx.out_dir)

    if len(fields) == 2:
        distance = snorm_distance(fields["picard"], fields["continuation"])
        ctx.results["cross_solver_distance"] = distance
        logger.info("Cross-solver distance", extra={"extra": {"snorm_distance": distance}})
    return fields


# ============================================================================
# Commands
# ============================================================================

def cmd_validate(ctx: RunContext) -> int:
    spec = load_model(ctx.config.model)
    ctx.results["model"] = spec.describe()
    _validate(ctx, spec)
    return EXIT_OK


def cmd_solve(ctx: RunContext) -> int:
    spec, bundle = _prepare(ctx)
    _validate(ctx, spec)
    _solve(ctx, spec, bundle)

    if ctx.config.stability_sweep:
        report = stability_sweep(spec, bundle, ctx.config.solver)
        ctx.results["stability"] = {"slope": report.slope, "intercept": report.intercept}
        ctx.artifacts.append(write_stability(report, ctx.out_dir))
    return EXIT_OK


def cmd_oracle_check(ctx: RunContext) -> int:
    """
    Raises:
        OracleUnavailableError: If the model is not linear-quadratic
        OracleMismatchError: If any solver misses the oracle by more than the tolerance
    """
    spec = load_model(ctx.config.model)
    if not spec.is_lq:
        raise OracleUnavailableError(
            f"Model {spec.name} is not linear-quadratic; no closed-form oracle", {"model": spec.name}
        )
    spec, bundle = _prepare(ctx, spec)
    fields = _solve(ctx, spec, bundle)

    cfg = ctx.config.oracle
    rs = solve_riccati(lq_source_of(spec), bundle.grid, cfg.refinement)
    oracle = oracle_field(rs, bundle, spec)
    ctx.artifacts += write_solution(oracle, ctx.out_dir, prefix="oracle")
    major_cost, minor_cost = predicted_costs(rs)
    ctx.results["oracle"] = {
        "riccati_residual": rs.residual,
        "riccati_residual_ok": rs.residual_ok,
        "riccati_residual_threshold": RESIDUAL_WARNING,
        "predicted_cost_major": major_cost,
        "predicted_cost_minor": minor_cost,
        "tolerance": cfg.tolerance,
    }

    failed = {}
    for method, solved in fields.items():
        comparison = compare_fields(solved, oracle)
        ctx.results["oracle"][method] = comparison.to_dict()
        ctx.artifacts.append(write_comparison(comparison, ctx.out_dir, method))
        if not comparison.passed(cfg.tolerance):
            failed[method] = comparison.relative_error
    if failed:
        raise OracleMismatchError(
            "Solver misses the closed-form oracle",
            {"relative_errors": failed, "tolerance": cfg.tolerance}
        )
    return EXIT_OK


def cmd_nash(ctx: RunContext) -> int:
    """
    Raises:
        ScalingAbortedError: After writing the completed rows as nash_partial*.csv
    """
    spec, bundle = _prepare(ctx)
    fields = _solve(ctx, spec, bundle, write=False)
    solved = next(iter(fields.values()))

    try:
        report = scaling_report(spec, solved, ctx.config.nash.ns, ctx.config.nash)
    except ScalingAbortedError as e:
        if e.partial is not None and e.partial.rows:
            ctx.artifacts += write_nash_report(e.partial, ctx.out_dir, partial=True)
        raise

    ctx.artifacts += write_nash_report(report, ctx.out_dir)
    ctx.results["nash"] = {
        "ns": report.ns,
        "fits": {name: vars(fit) for name, fit in sorted(report.fits.items())},
        "minor_agent": report.minor_agent,
    }
    return EXIT_OK


COMMANDS: Dict[str, Callable[[RunContext], int]] = {
    "solve": cmd_solve,
    "oracle-check": cmd_oracle_check,
    "nash": cmd_nash,
    "validate": cmd_validate,
}


# ============================================================================
# Entry Point
# ============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mfg-solver",
        description="Major/minor mean field game solver and verification harness",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub = subparsers.add_parser(name)
        sub.add_argument("--config", type=Path, default=None, help="TOML run config")
        sub.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                         help="Override a config key (repeatable)")
        sub.add_argument("--out", type=Path, default=None, help="Output directory")
        sub.add_argument("--seed", type=int, default=None)
        sub.add_argument("--threads", type=int, default=None)
        sub.add_argument("--log-level", default=None)
    return parser


def _print_error(error: MFGError) -> None:
    print(json.dumps(to_jsonable(error.to_dict()), sort_keys=True), file=sys.stderr)


def main(argv: List[str] | None = None) -> int:
    """
    Parse arguments, run one command and write its manifest

    Returns:
        Process exit code (0 success, 2 config, 3 validation, 4 divergence, 5 I/O)
    """
    args = build_parser().parse_args(argv)
    settings = get_settings()

    try:
        config = load_run_config(
            args.config,
            args.overrides,
            {"seed": args.seed, "threads": args.threads, "output_dir": args.out, "log_level": args.log_level},
        )
    except MFGError as e:
        _print_error(e)
        return e.exit_code

    setup_logger(config.log_level, config.output_dir, enable_console=settings.log_to_console)
    configure_worker_pool(config.threads)
    ctx = RunContext(command=args.command, config=config)
    logger.info(
        "Command started",
        extra={"extra": {"command": args.command, "model": config.model, "seed": config.seed,
                         "output_dir": str(config.output_dir)}}
    )

    error: MFGError | None = None
    try:
        exit_code = COMMANDS[args.command](ctx)
    except MFGError as e:
        logger.error("Command failed", extra={"extra": e.to_dict()})
        error, exit_code = e, e.exit_code
    except Exception as e:
        logger.exception("Unexpected failure")
        error = MFGError(f"Unexpected failure: {e}", {"exception": type(e).__name__})
        exit_code = EXIT_INTERNAL

    stats = get_worker_pool().get_stats()
    logger.debug("Worker pool statistics", extra={"extra": vars(stats)})

    status = "ok" if exit_code == EXIT_OK else "failed"
    manifest = build_manifest(
        args.command, config.manifest_echo(), status, exit_code, ctx.results, ctx.artifacts, error
    )
    try:
        write_manifest(config.output_dir, manifest)
    except MFGError as e:
        _print_error(e)
        return e.exit_code

    logger.info("Command finished", extra={"extra": {"command": args.command, "exit_code": exit_code}})
    return exit_code
