from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from src.catalog import load_model
from src.errors import MinimizerNotFoundError
from src.hamiltonian import (
    MajorAdjoint,
    MinorAdjoint,
    first_order_residual_major,
    first_order_residual_minor,
    hamiltonian_major,
    hamiltonian_minor,
    minimize_major,
    minimize_minor,
    summarize,
)
from src.model import ModelSpec
from src.stochastics import ParticleEnsemble


def _ensembles() -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(8)
    return rng.normal(0.5, 0.5, size=(3, 20)), rng.normal(-1.0, 2.0, size=(3, 20))


def test_lq_major_minimiser_is_closed_form(spec: ModelSpec) -> None:
    x0 = np.array([0.3, -1.0, 2.0])
    adj = MajorAdjoint(p0=np.array([1.0, -2.0, 0.5]), q0=np.zeros(3))
    states, _ = _ensembles()
    u0 = minimize_major(0.1, x0, adj, states, spec)
    np.testing.assert_allclose(u0, -adj.p0, rtol=1e-14)


def test_smooth_major_minimiser_zeroes_the_first_order_condition() -> None:
    spec = load_model("smooth_weak")
    x0 = np.linspace(-3.0, 3.0, 7)
    adj = MajorAdjoint(p0=np.linspace(-5.0, 5.0, 7), q0=np.full(7, 0.2))
    states, _ = _ensembles()
    m = summarize(spec, 0.2, states[:1])
    u0 = minimize_major(0.2, x0, adj, m, spec)
    residual = first_order_residual_major(0.2, x0, adj, u0, m, spec)
    assert np.max(np.abs(residual)) < 1e-8


def test_smooth_minor_minimiser_beats_nearby_controls() -> None:
    spec = load_model("smooth_weak")
    x = np.array([[-1.0, 0.0, 2.0]])
    x0 = np.array([[0.5]])
    adj = MinorAdjoint(p=np.array([[1.5, -0.3, 4.0]]), q=np.zeros((1, 3)), q_tilde=np.zeros((1, 3)))
    states, _ = _ensembles()
    u = minimize_minor(0.0, x, adj, x0, spec)
    assert np.max(np.abs(first_order_residual_minor(0.0, x, adj, u, x0, spec))) < 1e-8
    h_star = hamiltonian_minor(0.0, x, adj, u, x0, states[:1], spec)
    for delta in (-1e-2, 1e-2, -1.0, 1.0):
        assert np.all(h_star <= hamiltonian_minor(0.0, x, adj, u + delta, x0, states[:1], spec) + 1e-12)


def test_minor_minimiser_ignores_the_measure() -> None:
    spec = load_model("smooth_weak")
    x = np.array([[0.2, 1.0]])
    x0 = np.array([[0.0]])
    adj = MinorAdjoint(p=np.array([[0.7, -0.7]]), q=np.zeros((1, 2)), q_tilde=np.zeros((1, 2)))
    first, second = _ensembles()
    u = minimize_minor(0.0, x, adj, x0, spec)
    grid = np.linspace(-3.0, 3.0, 6001)
    for states in (first[:1], second[:1]):
        values = [float(hamiltonian_minor(0.0, x[0, 0], MinorAdjoint(0.7, 0.0, 0.0), v, 0.0, states, spec)[0])
                  for v in grid]
        assert grid[int(np.argmin(values))] == pytest.approx(u[0, 0], abs=1e-3)


def test_major_hamiltonian_accepts_every_measure_form(spec: ModelSpec) -> None:
    states, _ = _ensembles()
    adj = MajorAdjoint(p0=0.4, q0=0.1)
    from_array = hamiltonian_major(0.0, 1.0, adj, 0.5, states[0], spec)
    from_ensemble = hamiltonian_major(0.0, 1.0, adj, 0.5, ParticleEnsemble(0, states[0]), spec)
    from_summary = hamiltonian_major(0.0, 1.0, adj, 0.5, summarize(spec, 0.0, states[0]), spec)
    assert float(from_array) == float(from_ensemble) == float(from_summary)


def test_summary_of_decoupled_coefficients_is_constant() -> None:
    spec = load_model("lq_decoupled")
    first, second = _ensembles()
    a, b = summarize(spec, 0.0, first), summarize(spec, 0.0, second)
    for name in ("b0", "sigma0", "b", "sigma", "sigma_tilde"):
        assert np.array_equal(getattr(a, name), getattr(b, name)), name
    assert not np.array_equal(a.mean, b.mean)


def test_unbounded_first_order_condition_has_no_minimiser(spec: ModelSpec) -> None:
    flat = replace(
        spec,
        minor_cost=replace(spec.minor_cost, control_curvature=None, f1_u=lambda t, x, u, x0: np.zeros(np.shape(u)) - 1.0),
        lq_source=None,
    )
    adj = MinorAdjoint(p=np.zeros(2), q=np.zeros(2), q_tilde=np.zeros(2))
    with pytest.raises(MinimizerNotFoundError):
        minimize_minor(0.0, np.zeros(2), adj, np.zeros(2), flat)
