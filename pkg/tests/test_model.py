from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from src.catalog import load_model
from src.errors import AssumptionViolation, ConfigError, ModelEvaluationError
from src.lq_oracle import LQSpec
from src.model import (
    InitialLaw,
    ModelConstants,
    ModelSpec,
    affine_coefficient,
    constant_kernel,
    coupling_budget,
    evaluate_kernel,
    finite_difference,
    identity_kernel,
    kernel_average,
    validate_assumptions,
)


def _concave_terminal(spec: ModelSpec) -> ModelSpec:
    minor = replace(spec.minor_cost, g=lambda x, mbar, x0: -0.5 * x * x, g_x=lambda x, mbar, x0: -np.asarray(x))
    return replace(spec, minor_cost=minor, lq_source=None)


def test_constant_kernel_average_is_exact_for_any_ensemble() -> None:
    kernel = constant_kernel(0.1)
    rng = np.random.default_rng(0)
    for size in (1, 7, 1000):
        states = rng.normal(size=(3, size))
        assert np.array_equal(kernel_average(kernel, 0.0, states), np.full(3, 0.1))


def test_identity_kernel_average_is_the_mean() -> None:
    states = np.array([[1.0, 2.0, 6.0], [0.0, 0.0, 3.0]])
    np.testing.assert_allclose(kernel_average(identity_kernel, 0.0, states), [3.0, 1.0])


def test_non_finite_kernel_value_names_the_kernel() -> None:
    def bad(t: float, y: np.ndarray) -> np.ndarray:
        return np.log(y)

    with pytest.raises(ModelEvaluationError) as excinfo:
        evaluate_kernel(bad, 0.5, np.array([1.0, -1.0]))
    assert excinfo.value.details["kernel"] == "bad"
    assert excinfo.value.details["y"] == -1.0


def test_finite_difference_matches_analytic_derivative() -> None:
    derivative = finite_difference(lambda t, x: x ** 3, 1)
    np.testing.assert_allclose(derivative(0.0, np.array([0.0, 1.0, 2.0])), [0.0, 3.0, 12.0], rtol=1e-6, atol=1e-9)


def test_affine_coefficient_reads_the_ensemble_mean() -> None:
    coefficient = affine_coefficient("b", intercept=1.0, kernel_slope=0.5, slope_x=2.0, slope_u=3.0)
    states = np.array([[0.0, 2.0]])
    intercept = coefficient.intercept(0.0, states)
    np.testing.assert_allclose(intercept, [1.5])
    np.testing.assert_allclose(coefficient(0.0, 1.0, 1.0, intercept), [6.5])


def test_model_constants_report_ordering_violations() -> None:
    assert ModelConstants(L=2.0, C_f0=1.0, C_f=1.0).violations() == []
    problems = ModelConstants(L=2.0, L_m=3.0, C_f0=1.0, C_f=0.1).violations()
    assert any("C_f" in p for p in problems)
    assert any("L_m" in p for p in problems)


def test_initial_law_point_mass_consumes_no_randomness() -> None:
    rng = np.random.default_rng(1)
    state = rng.bit_generator.state
    draws = InitialLaw(family="point", mean=2.0).sample(rng, 4)
    assert np.array_equal(draws, np.full(4, 2.0))
    assert rng.bit_generator.state == state


def test_initial_law_uniform_has_requested_moments() -> None:
    draws = InitialLaw(family="uniform", mean=1.0, std=0.5).sample(np.random.default_rng(2), 200_000)
    assert draws.mean() == pytest.approx(1.0, abs=0.01)
    assert draws.std() == pytest.approx(0.5, abs=0.01)


@pytest.mark.parametrize("name", ["lq_weak", "lq_decoupled", "lq_unit", "trivial", "smooth_weak"])
def test_catalog_instances_pass_validation(name: str) -> None:
    report = validate_assumptions(load_model(name), sample_budget=64, seed=5)
    assert report.passed, report.summary()


def test_concave_terminal_cost_fails_validation_with_a_witness() -> None:
    spec = _concave_terminal(LQSpec(Q=1.0, G=1.0).to_model_spec())
    report = validate_assumptions(spec, sample_budget=32, seed=0)
    assert not report.passed
    names = [check.name for check in report.failures()]
    assert "minor_state_convexity" in names
    witness = report.check("minor_state_convexity").worst_sample
    assert set(witness) >= {"x_1", "x_2"}
    assert report.check("major_convexity").passed


def test_validation_is_deterministic_in_the_seed() -> None:
    spec = load_model("lq_weak")
    first = validate_assumptions(spec, sample_budget=32, seed=9).summary()
    second = validate_assumptions(spec, sample_budget=32, seed=9).summary()
    assert first == second


def test_validation_rejects_bad_budget_and_tolerance() -> None:
    spec = load_model("lq_weak")
    with pytest.raises(ConfigError):
        validate_assumptions(spec, sample_budget=0)
    with pytest.raises(ConfigError):
        validate_assumptions(spec, tol=0.0)


def test_non_finite_cost_aborts_validation() -> None:
    spec = LQSpec().to_model_spec()
    major = replace(spec.major_cost, g0=lambda x0, mbar: np.log(np.asarray(x0) * 0.0), g0_x=lambda x0, mbar: 0.0 * x0)
    with pytest.raises(ModelEvaluationError):
        validate_assumptions(replace(spec, major_cost=major, lq_source=None), sample_budget=8)


def test_negative_control_weight_is_rejected() -> None:
    with pytest.raises(AssumptionViolation):
        LQSpec(R=-1.0)


def test_coupling_budget_of_decoupled_instance_is_zero() -> None:
    assert coupling_budget(load_model("lq_decoupled")) == 0.0
    assert coupling_budget(load_model("lq_weak")) > 0.0


def test_with_init_mirrors_into_lq_source() -> None:
    law = InitialLaw(family="point", mean=3.0)
    spec = load_model("lq_weak").with_init(init_minor=law)
    assert spec.init_minor == law
    assert spec.lq_source.init_minor == law
