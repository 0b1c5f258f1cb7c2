"""
Shared fixtures: small grids, bundles and LQ instances that keep the suite fast
"""

from __future__ import annotations

import pytest

from src.catalog import load_model
from src.config import SolverConfig
from src.fbsde import SolutionField
from src.lq_oracle import LQSpec, oracle_field, solve_riccati
from src.model import InitialLaw, ModelSpec
from src.stochastics import STREAM_KIND_LIMIT_AGENT, PathBundle, TimeGrid, sample_bundle
from src.worker_pool import configure_worker_pool


def pytest_addoption(parser: pytest.Parser) -> None:
    parser.addoption("--runslow", action="store_true", default=False, help="run acceptance-scale tests")


def pytest_collection_modifyitems(config: pytest.Config, items: list[pytest.Item]) -> None:
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="acceptance-scale run; use --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def _single_worker_pool() -> None:
    configure_worker_pool(1)


def short_lq(**overrides: float) -> LQSpec:
    """Weakly coupled LQ instance on a half-unit horizon"""
    coefficients = dict(
        a0=0.1, s0=0.3, Q0=1.0, G0=0.5, e0=0.2, r0=0.2,
        a=0.2, s=0.3, s_tilde=0.2, Q=1.0, G=0.5, e=0.04, rho=0.2, r=0.1,
    )
    coefficients.update(overrides)
    return LQSpec(
        **coefficients,
        horizon=0.5,
        init_major=InitialLaw(family="point", mean=1.0),
        init_minor=InitialLaw(family="gaussian", mean=0.5, std=0.5),
        name="short_lq",
    )


@pytest.fixture
def lq() -> LQSpec:
    return short_lq()


@pytest.fixture
def spec(lq: LQSpec) -> ModelSpec:
    return lq.to_model_spec()


@pytest.fixture
def grid(lq: LQSpec) -> TimeGrid:
    return TimeGrid(lq.horizon, 10)


@pytest.fixture
def bundle(spec: ModelSpec, grid: TimeGrid) -> PathBundle:
    return sample_bundle(grid, 8, 32, spec.init_major, spec.init_minor, seed=7)


@pytest.fixture
def solver_cfg() -> SolverConfig:
    return SolverConfig(picard_tol=1e-3, max_picard=300, max_phi_iterations=200)


@pytest.fixture
def decoupled() -> ModelSpec:
    return load_model("lq_decoupled")


@pytest.fixture
def decoupled_bundle(decoupled: ModelSpec) -> PathBundle:
    return sample_bundle(TimeGrid(decoupled.horizon, 5), 6, 16, decoupled.init_major, decoupled.init_minor, seed=3)


@pytest.fixture
def decoupled_agents(decoupled: ModelSpec) -> PathBundle:
    """Fresh limit-agent noise riding on the common noise of decoupled_bundle"""
    return sample_bundle(TimeGrid(decoupled.horizon, 5), 6, 16, decoupled.init_major, decoupled.init_minor, seed=3,
                         agent_kind=STREAM_KIND_LIMIT_AGENT)


@pytest.fixture
def decoupled_oracle(decoupled: ModelSpec, decoupled_bundle: PathBundle) -> SolutionField:
    rs = solve_riccati(decoupled.lq_source, decoupled_bundle.grid)
    return oracle_field(rs, decoupled_bundle, decoupled)
