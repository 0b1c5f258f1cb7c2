from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from src.catalog import load_model
from src.errors import ConfigError, EmptyBundleError, RiccatiEscapeError, SizeMismatchError
from src.fbsde import SolutionField
from src.lq_oracle import (
    LQSpec,
    brute_force_single_period,
    compare_fields,
    discrete_feedback_gains,
    lq_source_of,
    oracle_feedback,
    oracle_field,
    predicted_costs,
    solve_riccati,
)
from src.model import InitialLaw, ModelSpec
from src.stochastics import PathBundle, TimeGrid


def test_unit_instance_has_constant_gain() -> None:
    lq = lq_source_of(load_model("lq_unit"))
    rs = solve_riccati(lq, TimeGrid(1.0, 10))
    np.testing.assert_allclose(rs.coefficient("k"), 1.0, atol=1e-10)
    np.testing.assert_allclose(rs.coefficient("k0"), 1.0, atol=1e-10)
    assert rs.residual < 1e-8
    assert rs.residual_ok
    assert not replace(rs, residual=1e-3).residual_ok


def test_scalar_riccati_matches_its_closed_form() -> None:
    lq = LQSpec(G=1.0)
    rs = solve_riccati(lq, TimeGrid(1.0, 4))
    times = rs.grid.knots
    np.testing.assert_allclose(rs.coefficient("k"), 1.0 / (2.0 - times), rtol=1e-6)


def test_decoupled_instance_has_no_cross_terms() -> None:
    rs = solve_riccati(lq_source_of(load_model("lq_decoupled")), TimeGrid(1.0, 10))
    for name in ("phi", "psi", "psi0", "chi", "chi0"):
        assert np.all(rs.coefficient(name) == 0.0), name


def test_exploding_riccati_is_reported() -> None:
    with pytest.raises(RiccatiEscapeError) as excinfo:
        solve_riccati(LQSpec(a=10.0, c=0.0, G=1.0), TimeGrid(1.0, 10))
    assert 0.0 <= excinfo.value.details["t"] < 1.0


def test_grid_horizon_must_match() -> None:
    with pytest.raises(SizeMismatchError):
        solve_riccati(LQSpec(horizon=1.0), TimeGrid(2.0, 10))


def test_non_lq_model_has_no_source() -> None:
    with pytest.raises(ConfigError):
        lq_source_of(load_model("smooth_weak"))


def test_feedback_flags_interpolated_times() -> None:
    rs = solve_riccati(LQSpec(Q=1.0, G=0.5), TimeGrid(1.0, 10))
    on_knot = oracle_feedback(rs, 0.5, np.array([1.0]), np.array([0.0]), np.array([0.0]))
    off_knot = oracle_feedback(rs, 0.55, np.array([1.0]), np.array([0.0]), np.array([0.0]))
    assert not on_knot.interpolated
    assert off_knot.interpolated
    assert on_knot.u[0] == pytest.approx(-rs.coefficient("k")[5])


def test_unit_instance_predicted_costs() -> None:
    rs = solve_riccati(lq_source_of(load_model("lq_unit")), TimeGrid(1.0, 10))
    major, minor = predicted_costs(rs)
    assert major == pytest.approx(0.5, abs=1e-8)
    assert minor == pytest.approx(1.0, abs=1e-8)


def test_discrete_gains_approach_the_riccati_gain() -> None:
    lq = lq_source_of(load_model("lq_unit"))
    major, minor = discrete_feedback_gains(lq, TimeGrid(1.0, 100))
    assert major.shape == minor.shape == (100,)
    np.testing.assert_allclose(minor, 1.0, atol=0.05)
    np.testing.assert_allclose(major, 1.0, atol=0.05)


def test_oracle_field_compares_equal_to_itself(decoupled_oracle: SolutionField) -> None:
    comparison = compare_fields(decoupled_oracle, decoupled_oracle)
    assert comparison.relative_error == 0.0
    assert comparison.passed(1e-12)
    assert set(comparison.per_quantity) == {"X0", "p0", "q0", "u0", "X", "p", "q", "q_tilde", "u"}


def test_oracle_field_controls_follow_the_adjoints(decoupled: ModelSpec, decoupled_oracle: SolutionField) -> None:
    lq = lq_source_of(decoupled)
    np.testing.assert_allclose(decoupled_oracle.u, -lq.c * decoupled_oracle.p[:, :, :-1] / lq.R, rtol=1e-12)
    np.testing.assert_allclose(decoupled_oracle.u0, -lq.c0 * decoupled_oracle.p0[:, :-1] / lq.R0, rtol=1e-12)


def test_oracle_field_needs_the_riccati_grid(decoupled: ModelSpec, decoupled_bundle: PathBundle) -> None:
    rs = solve_riccati(lq_source_of(decoupled), TimeGrid(decoupled.horizon, 7))
    with pytest.raises(SizeMismatchError):
        oracle_field(rs, decoupled_bundle, decoupled)


def _one_step_instance() -> ModelSpec:
    point = InitialLaw(family="point", mean=1.0)
    return LQSpec(G=1.0, init_major=point, init_minor=point, name="one_step").to_model_spec()


def test_brute_force_finds_the_one_period_optimum() -> None:
    result = brute_force_single_period(_one_step_instance(), np.linspace(-1.0, 1.0, 41), n_mc=4)
    assert result.best_control == pytest.approx(-0.5)
    assert result.best_cost == pytest.approx(0.25)
    assert list(result.table.columns) == ["control", "cost", "stderr"]
    assert np.all(result.table["stderr"] == 0.0)


def test_brute_force_ties_go_to_the_smallest_control() -> None:
    spec = _one_step_instance()
    symmetric = LQSpec(G=0.0, init_major=spec.init_major, init_minor=spec.init_minor).to_model_spec()
    assert brute_force_single_period(symmetric, [1.0, -1.0], n_mc=2).best_control == -1.0
    assert brute_force_single_period(symmetric, [1.0, -1.0, 0.0], n_mc=2).best_control == 0.0


def test_brute_force_input_validation() -> None:
    spec = _one_step_instance()
    with pytest.raises(ConfigError):
        brute_force_single_period(spec, [], n_mc=4)
    with pytest.raises(EmptyBundleError):
        brute_force_single_period(spec, [0.0], n_mc=0)
