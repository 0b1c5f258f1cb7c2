from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from src.catalog import load_model
from src.config import NashConfig, SolverConfig
from src.errors import BundleMismatchError, ConfigError, EmptyFamilyError, UnpairedError
from src.fbsde import SolutionField, solve_coupled_picard
from src.lq_oracle import oracle_field, solve_riccati
from src.model import ModelSpec
from src.nash import (
    chaos_gap,
    default_deviation_family,
    deviation_family_for,
    deviation_gap,
    estimate_cost,
    fit_scaling,
    reference_deviation,
    scaling_report,
    shifted_deviation,
    simulate_finite_game,
    simulate_limit_agents,
)
from src.stochastics import STREAM_KIND_LIMIT_AGENT, PathBundle, TimeGrid, sample_bundle


def _small_nash(**overrides) -> NashConfig:
    values = dict(ns=[2, 4, 8], n_replications=6, reference_particles=16, minor_agent=1)
    values.update(overrides)
    return NashConfig(**values)


def test_fresh_limit_agents_share_only_the_common_noise(decoupled: ModelSpec, decoupled_oracle: SolutionField,
                                                        decoupled_agents: PathBundle) -> None:
    N = 5
    limit = simulate_limit_agents(decoupled_oracle, decoupled, N, decoupled_agents.head(6, N))
    np.testing.assert_allclose(limit.X0, decoupled_oracle.X0, rtol=1e-12, atol=1e-12)
    assert not np.any(limit.X[:, :, 0] == decoupled_oracle.X[:, :N, 0])
    assert not np.any(limit.X[:, :, -1] == decoupled_oracle.X[:, :N, -1])
    assert limit.agent_kind == STREAM_KIND_LIMIT_AGENT


def test_representative_noise_replays_the_field_particle(decoupled: ModelSpec, decoupled_oracle: SolutionField,
                                                         decoupled_bundle: PathBundle) -> None:
    limit = simulate_limit_agents(decoupled_oracle, decoupled, 1, decoupled_bundle.head(6, 1))
    np.testing.assert_allclose(limit.X, decoupled_oracle.X[:, :1], rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(limit.u, decoupled_oracle.u[:, :1], rtol=1e-12, atol=1e-12)


def test_decoupled_agents_are_independent_given_the_common_noise(decoupled: ModelSpec,
                                                                 decoupled_oracle: SolutionField) -> None:
    agents = sample_bundle(decoupled_oracle.grid, 6, 200, decoupled.init_major, decoupled.init_minor, seed=3,
                           agent_kind=STREAM_KIND_LIMIT_AGENT)
    limit = simulate_limit_agents(decoupled_oracle, decoupled, 200, agents)
    increments = limit.X[:, :, -1] - limit.X[:, :, 0]
    centred = increments - increments.mean(axis=1, keepdims=True)
    even, odd = centred[:, 0::2].reshape(-1), centred[:, 1::2].reshape(-1)
    correlation = np.corrcoef(even, odd)[0, 1]
    assert abs(correlation) <= 4.0 / np.sqrt(even.size)


def test_limit_agents_are_exchangeable(decoupled: ModelSpec, decoupled_oracle: SolutionField,
                                       decoupled_agents: PathBundle) -> None:
    bundle = decoupled_agents.head(6, 4)
    perm = [2, 0, 3, 1]
    permuted = replace(bundle, dW=bundle.dW[:, perm], xi=bundle.xi[:, perm])
    limit = simulate_limit_agents(decoupled_oracle, decoupled, 4, bundle)
    swapped = simulate_limit_agents(decoupled_oracle, decoupled, 4, permuted)
    np.testing.assert_allclose(swapped.X, limit.X[:, perm], rtol=1e-12, atol=1e-12)
    np.testing.assert_array_equal(swapped.X0, limit.X0)


def test_population_must_be_positive(decoupled: ModelSpec, decoupled_oracle: SolutionField,
                                     decoupled_agents: PathBundle) -> None:
    with pytest.raises(ConfigError):
        simulate_limit_agents(decoupled_oracle, decoupled, 0, decoupled_agents)


def test_bundle_must_share_the_field_seed(decoupled: ModelSpec, decoupled_oracle: SolutionField) -> None:
    other = sample_bundle(decoupled_oracle.grid, 6, 16, decoupled.init_major, decoupled.init_minor, seed=4)
    with pytest.raises(BundleMismatchError):
        simulate_limit_agents(decoupled_oracle, decoupled, 3, other)


def test_decoupled_instance_has_no_chaos_gap(decoupled: ModelSpec, decoupled_oracle: SolutionField,
                                             decoupled_agents: PathBundle) -> None:
    bundle = decoupled_agents.head(6, 4)
    limit = simulate_limit_agents(decoupled_oracle, decoupled, 4, bundle)
    game = simulate_finite_game(decoupled, limit, bundle, 4)
    assert chaos_gap(limit, game).value == pytest.approx(0.0, abs=1e-24)


def test_chaos_gap_rejects_a_deviated_game(decoupled: ModelSpec, decoupled_oracle: SolutionField,
                                           decoupled_agents: PathBundle) -> None:
    bundle = decoupled_agents.head(6, 4)
    limit = simulate_limit_agents(decoupled_oracle, decoupled, 4, bundle)
    deviated = simulate_finite_game(decoupled, limit, bundle, 4, (1, shifted_deviation(0.5)))
    assert deviated.deviator == (1, "shift_+0.5")
    with pytest.raises(UnpairedError):
        chaos_gap(limit, deviated)


def test_deviator_index_is_checked(decoupled: ModelSpec, decoupled_oracle: SolutionField,
                                   decoupled_agents: PathBundle) -> None:
    bundle = decoupled_agents.head(6, 3)
    limit = simulate_limit_agents(decoupled_oracle, decoupled, 3, bundle)
    with pytest.raises(ConfigError):
        simulate_finite_game(decoupled, limit, bundle, 3, (4, reference_deviation()))


def test_reference_only_family_has_zero_gap(decoupled: ModelSpec, decoupled_oracle: SolutionField,
                                            decoupled_agents: PathBundle) -> None:
    gap = deviation_gap(decoupled, decoupled_oracle, 1, [reference_deviation()], 4, decoupled_agents.head(6, 4))
    assert gap.epsilon == 0.0
    assert gap.stderr == 0.0
    assert gap.best == "reference"
    assert gap.costs["reference"] == pytest.approx(gap.reference_cost)


def test_gap_is_never_negative(decoupled: ModelSpec, decoupled_oracle: SolutionField,
                               decoupled_agents: PathBundle) -> None:
    family = deviation_family_for(decoupled, decoupled_oracle.grid, 0)
    gap = deviation_gap(decoupled, decoupled_oracle, 0, family, 4, decoupled_agents.head(6, 4))
    assert gap.epsilon >= 0.0
    assert set(gap.costs) == {d.name for d in family}


def test_empty_family_is_rejected(decoupled: ModelSpec, decoupled_oracle: SolutionField,
                                  decoupled_agents: PathBundle) -> None:
    with pytest.raises(EmptyFamilyError):
        deviation_gap(decoupled, decoupled_oracle, 1, [], 4, decoupled_agents.head(6, 4))


def test_trivial_instance_costs_nothing() -> None:
    spec = load_model("trivial")
    bundle = sample_bundle(TimeGrid(spec.horizon, 4), 4, 8, spec.init_major, spec.init_minor, seed=2)
    agents = sample_bundle(bundle.grid, 4, 3, spec.init_major, spec.init_minor, seed=2,
                           agent_kind=STREAM_KIND_LIMIT_AGENT)
    field = solve_coupled_picard(spec, bundle, SolverConfig())
    limit = simulate_limit_agents(field, spec, 3, agents)
    game = simulate_finite_game(spec, limit, agents, 3)
    assert estimate_cost(spec, 0, game) == (0.0, 0.0)
    assert estimate_cost(spec, 2, game, n_replications=2) == (0.0, 0.0)
    with pytest.raises(ConfigError):
        estimate_cost(spec, 4, game)


def test_finite_game_needs_the_limit_agents_bundle(decoupled: ModelSpec, decoupled_oracle: SolutionField,
                                                   decoupled_bundle: PathBundle,
                                                   decoupled_agents: PathBundle) -> None:
    limit = simulate_limit_agents(decoupled_oracle, decoupled, 4, decoupled_agents.head(6, 4))
    with pytest.raises(BundleMismatchError):
        simulate_finite_game(decoupled, limit, decoupled_bundle.head(6, 4), 4)


def test_fit_needs_three_positive_points() -> None:
    fit = fit_scaling([8, 16, 32, 64], [0.1, 0.0, -1.0, 0.05])
    assert fit.degenerate
    assert fit.n_points == 2
    assert np.isnan(fit.slope)


def test_fit_recovers_an_exact_power_law() -> None:
    ns = [8, 16, 32, 64, 128]
    fit = fit_scaling(ns, [2.0 * n ** -0.5 for n in ns])
    assert not fit.degenerate
    assert fit.slope == pytest.approx(-0.5, abs=1e-10)
    assert fit.intercept == pytest.approx(np.log(2.0), abs=1e-10)
    assert fit.ci_low <= fit.slope <= fit.ci_high


def test_default_family_names() -> None:
    names = [d.name for d in default_deviation_family()]
    assert names == ["scale_0.5", "scale_1.5", "shift_-1", "shift_-0.1", "shift_+0.1", "shift_+1", "zero"]


def test_best_response_is_offered_only_for_lq(decoupled: ModelSpec) -> None:
    grid = TimeGrid(1.0, 5)
    assert deviation_family_for(decoupled, grid, 1)[-1].name == "best_response"
    assert deviation_family_for(decoupled, grid, 1)[-1].closed_loop
    assert "best_response" not in [d.name for d in deviation_family_for(load_model("smooth_weak"), grid, 1)]


def test_scaling_report_rows_are_sorted_and_order_free(decoupled: ModelSpec,
                                                       decoupled_oracle: SolutionField) -> None:
    report = scaling_report(decoupled, decoupled_oracle, [8, 2, 4], _small_nash())
    assert report.ns == [2, 4, 8]
    assert set(report.fits) == {"chaos_gap", "gap_major", "gap_minor"}
    assert all(row.chaos_gap == pytest.approx(0.0, abs=1e-24) for row in report.rows)
    assert report.fits["chaos_gap"].degenerate

    again = scaling_report(decoupled, decoupled_oracle, [4, 8, 2], _small_nash())
    assert [vars(row) for row in again.rows] == [vars(row) for row in report.rows]


def test_scaling_report_needs_three_counts(decoupled: ModelSpec, decoupled_oracle: SolutionField) -> None:
    with pytest.raises(ConfigError):
        scaling_report(decoupled, decoupled_oracle, [2, 4, 4], _small_nash())


@pytest.fixture(scope="module")
def lq_weak_chaos() -> dict:
    spec = load_model("lq_weak")
    grid = TimeGrid(spec.horizon, 10)
    bundle = sample_bundle(grid, 128, 256, spec.init_major, spec.init_minor, seed=11)
    field = oracle_field(solve_riccati(spec.lq_source, grid), bundle, spec)
    agents = sample_bundle(grid, 128, 16, spec.init_major, spec.init_minor, seed=11,
                           agent_kind=STREAM_KIND_LIMIT_AGENT)
    gaps = {}
    for N in (2, 4, 8, 16):
        limit = simulate_limit_agents(field, spec, N, agents.head(128, N))
        gaps[N] = chaos_gap(limit, simulate_finite_game(spec, limit, agents.head(128, N), N))
    return gaps


def test_chaos_gap_shrinks_when_the_population_doubles(lq_weak_chaos: dict) -> None:
    for small, large in ((2, 4), (4, 8), (8, 16)):
        assert 0.0 < lq_weak_chaos[large].value < lq_weak_chaos[small].value


def test_chaos_gap_is_nonincreasing_within_its_error(lq_weak_chaos: dict) -> None:
    ns = sorted(lq_weak_chaos)
    for small, large in zip(ns, ns[1:]):
        a, b = lq_weak_chaos[small], lq_weak_chaos[large]
        assert b.value <= a.value + 2.0 * (a.stderr + b.stderr)


@pytest.mark.slow
def test_acceptance_population_scaling() -> None:
    spec = load_model("lq_weak")
    grid = TimeGrid(spec.horizon, 50)
    cfg = NashConfig(n_replications=128, reference_particles=4096)
    bundle = sample_bundle(grid, 128, 4096, spec.init_major, spec.init_minor, seed=0)
    field = oracle_field(solve_riccati(spec.lq_source, grid), bundle, spec)
    report = scaling_report(spec, field, cfg.ns, cfg)

    chaos = report.fits["chaos_gap"]
    assert not chaos.degenerate
    assert chaos.slope == pytest.approx(-1.0, abs=0.25)
    for name in ("gap_major", "gap_minor"):
        fit = report.fits[name]
        assert not fit.degenerate
        assert fit.slope <= -0.35
        series = report.series(name)
        assert series[-1] * 4.0 <= series[0]
