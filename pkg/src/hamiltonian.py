"""
Generalized Hamiltonians and their minimizing controls
Closed form for quadratic control costs, safeguarded Newton with bisection fallback otherwise
"""

from dataclasses import dataclass, fields
from typing import Any, Callable, List

import numpy as np

from .errors import MinimizerNotFoundError
from .logger import get_logger
from .model import ModelSpec, kernel_average
from .stochastics import ParticleEnsemble, TimeGrid


# ============================================================================
# Logger
# ============================================================================

logger = get_logger("mfg_solver.hamiltonian")

MAX_ITERATIONS = 100
RESIDUAL_TOLERANCE = 1e-10
MAX_BRACKET_DOUBLINGS = 64
_EPS = np.finfo(float).eps


# ============================================================================
# Adjoints and Measure Summaries
# ============================================================================

@dataclass(frozen=True)
class MajorAdjoint:
    p0: Any
    q0: Any


@dataclass(frozen=True)
class MinorAdjoint:
    p: Any
    q: Any
    q_tilde: Any


@dataclass(frozen=True)
class MeasureSummary:
    """
    Every scalar-form average the dynamics and costs read from one measure

    Arrays have the measure's batch shape (one entry per scenario).
    """
    b0: np.ndarray
    sigma0: np.ndarray
    b: np.ndarray
    sigma: np.ndarray
    sigma_tilde: np.ndarray
    major_bar: np.ndarray
    minor_bar: np.ndarray
    mean: np.ndarray

    def per_particle(self) -> "MeasureSummary":
        """Same summary with a trailing particle axis for broadcasting against (K, M) states"""
        return MeasureSummary(**{f.name: np.asarray(getattr(self, f.name))[..., None] for f in fields(self)})


def summarize(spec: ModelSpec, t: float, states: np.ndarray) -> MeasureSummary:
    """
    Scalar-form averages of an ensemble batch

    Args:
        spec: Model instance
        t: Time
        states: Minor states, particles on the last axis

    Returns:
        MeasureSummary over the leading (scenario) axes
    """
    states = np.asarray(states, dtype=float)
    return MeasureSummary(
        b0=spec.b0.intercept(t, states),
        sigma0=spec.sigma0.intercept(t, states),
        b=spec.b.intercept(t, states),
        sigma=spec.sigma.intercept(t, states),
        sigma_tilde=spec.sigma_tilde.intercept(t, states),
        major_bar=kernel_average(spec.major_cost.measure_kernel, t, states),
        minor_bar=kernel_average(spec.minor_cost.measure_kernel, t, states),
        mean=states.mean(axis=-1),
    )


def summarize_flow(spec: ModelSpec, grid: TimeGrid, flow: np.ndarray) -> List[MeasureSummary]:
    """Summaries of a (K, M, n+1) measure flow, one per knot; computed once per frozen flow"""
    return [summarize(spec, grid.time(k), flow[..., k]) for k in range(grid.n_steps + 1)]


def _as_summary(spec: ModelSpec, t: float, m: Any) -> MeasureSummary:
    if isinstance(m, MeasureSummary):
        return m
    if isinstance(m, ParticleEnsemble):
        return summarize(spec, t, m.states)
    return summarize(spec, t, np.asarray(m, dtype=float))


# ============================================================================
# Hamiltonians
# ============================================================================

def hamiltonian_major(t: float, x0: Any, adj: MajorAdjoint, u0: Any, m: Any, spec: ModelSpec) -> np.ndarray:
    """H0 = b0 p0 + sigma0 q0 + f0 at (t, x0, u0, m)"""
    s = _as_summary(spec, t, m)
    return (
        spec.b0(t, x0, u0, s.b0) * adj.p0
        + spec.sigma0(t, x0, u0, s.sigma0) * adj.q0
        + np.asarray(spec.major_cost.f0(t, x0, u0, s.major_bar))
    )


def hamiltonian_minor(t: float, x: Any, adj: MinorAdjoint, u: Any, x0: Any, m: Any, spec: ModelSpec) -> np.ndarray:
    """H = b p + sigma q + sigma_tilde q_tilde + f1 + f2 at (t, x, u, m, x0)"""
    s = _as_summary(spec, t, m)
    return (
        spec.b(t, x, u, s.b) * adj.p
        + spec.sigma(t, x, u, s.sigma) * adj.q
        + spec.sigma_tilde(t, x, u, s.sigma_tilde) * adj.q_tilde
        + spec.minor_cost.f(t, x, u, s.minor_bar, x0)
    )


def major_state_derivative(t: float, x0: Any, adj: MajorAdjoint, u0: Any, s: MeasureSummary,
                           spec: ModelSpec) -> np.ndarray:
    """dH0/dx0, the backward generator of the major adjoint"""
    return (
        spec.b0.slope_x(t) * adj.p0
        + spec.sigma0.slope_x(t) * adj.q0
        + np.asarray(spec.major_cost.f0_x(t, x0, u0, s.major_bar))
    )


def minor_state_derivative(t: float, x: Any, adj: MinorAdjoint, u: Any, x0: Any, s: MeasureSummary,
                           spec: ModelSpec) -> np.ndarray:
    """dH/dx, the backward generator of the minor adjoint"""
    return (
        spec.b.slope_x(t) * adj.p
        + spec.sigma.slope_x(t) * adj.q
        + spec.sigma_tilde.slope_x(t) * adj.q_tilde
        + spec.minor_cost.f_x(t, x, u, s.minor_bar, x0)
    )


# ============================================================================
# First-Order Conditions
# ============================================================================

def _major_linear_term(t: float, adj: MajorAdjoint, spec: ModelSpec) -> np.ndarray:
    return spec.b0.slope_u(t) * np.asarray(adj.p0) + spec.sigma0.slope_u(t) * np.asarray(adj.q0)


def _minor_linear_term(t: float, adj: MinorAdjoint, spec: ModelSpec) -> np.ndarray:
    return (
        spec.b.slope_u(t) * np.asarray(adj.p)
        + spec.sigma.slope_u(t) * np.asarray(adj.q)
        + spec.sigma_tilde.slope_u(t) * np.asarray(adj.q_tilde)
    )


def first_order_residual_major(t: float, x0: Any, adj: MajorAdjoint, u0: Any, m: Any,
                               spec: ModelSpec) -> np.ndarray:
    """dH0/du0 at u0"""
    s = _as_summary(spec, t, m)
    return _major_linear_term(t, adj, spec) + np.asarray(spec.major_cost.f0_u(t, x0, u0, s.major_bar))


def first_order_residual_minor(t: float, x: Any, adj: MinorAdjoint, u: Any, x0: Any,
                               spec: ModelSpec) -> np.ndarray:
    """dH/du at u"""
    return _minor_linear_term(t, adj, spec) + np.asarray(spec.minor_cost.f1_u(t, x, u, x0))


def _solve_first_order(residual: Callable[[np.ndarray], np.ndarray], shape: tuple, label: str) -> np.ndarray:
    """
    Root of an increasing scalar first-order condition, elementwise

    The bracket grows geometrically from u = 0; Newton steps with a
    central-difference slope are accepted only inside the bracket.

    Raises:
        MinimizerNotFoundError: If no bracket or no converged root is found
    """
    def g(u: np.ndarray) -> np.ndarray:
        return np.broadcast_to(np.asarray(residual(u), dtype=float), shape)

    u = np.zeros(shape)
    g0 = g(u)
    lo = np.where(g0 <= 0.0, 0.0, -np.inf)
    hi = np.where(g0 >= 0.0, 0.0, np.inf)

    step = 1.0
    for _ in range(MAX_BRACKET_DOUBLINGS):
        open_lo = np.isinf(lo)
        open_hi = np.isinf(hi)
        if not (open_lo.any() or open_hi.any()):
            break
        probe = np.where(open_lo, -step, np.where(open_hi, step, 0.0))
        gp = g(probe)
        lo = np.where(open_lo & (gp <= 0.0), probe, lo)
        hi = np.where(open_lo & (gp > 0.0), probe, hi)
        hi = np.where(open_hi & (gp >= 0.0), probe, hi)
        lo = np.where(open_hi & (gp < 0.0), probe, lo)
        step *= 2.0
    else:
        if np.isinf(lo).any() or np.isinf(hi).any():
            raise MinimizerNotFoundError(
                f"No bracket for the {label} first-order condition",
                {"largest_probe": step}
            )

    residual_now = g0
    for _ in range(MAX_ITERATIONS):
        residual_now = g(u)
        if not np.all(np.isfinite(residual_now)):
            raise MinimizerNotFoundError(
                f"Non-finite {label} first-order residual", {"u": u[~np.isfinite(residual_now)][:4]}
            )
        scale = 1.0 + np.abs(u)
        done = (np.abs(residual_now) <= RESIDUAL_TOLERANCE * scale) | (hi - lo <= 4.0 * _EPS * scale)
        if np.all(done):
            return u

        lo = np.where(residual_now < 0.0, np.maximum(lo, u), lo)
        hi = np.where(residual_now > 0.0, np.minimum(hi, u), hi)

        h = 1e-6 * scale
        slope = (g(u + h) - g(u - h)) / (2.0 * h)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = u - residual_now / slope
        accept = (slope > 0.0) & np.isfinite(newton) & (newton > lo) & (newton < hi)
        u = np.where(done, u, np.where(accept, newton, 0.5 * (lo + hi)))

    worst = float(np.max(np.abs(residual_now)))
    raise MinimizerNotFoundError(
        f"{label} minimiser did not converge in {MAX_ITERATIONS} iterations",
        {"residual": worst}
    )


# ============================================================================
# Minimizers
# ============================================================================

def minimize_major(t: float, x0: Any, adj: MajorAdjoint, m: Any, spec: ModelSpec) -> np.ndarray:
    """
    Unique minimiser of u0 -> H0(t, x0, p0, q0, u0, m)

    Args:
        t: Time
        x0: Major state(s)
        adj: Major adjoint(s), broadcast against x0
        m: MeasureSummary, ParticleEnsemble or raw particle states
        spec: Model instance

    Returns:
        Control array of the broadcast shape

    Raises:
        MinimizerNotFoundError: If the Newton/bisection search fails
    """
    s = _as_summary(spec, t, m)
    cost = spec.major_cost
    linear = _major_linear_term(t, adj, spec)
    shape = np.broadcast_shapes(np.shape(x0), np.shape(linear), np.shape(s.major_bar))

    if cost.control_curvature is not None:
        offset = np.asarray(cost.f0_u(t, x0, np.zeros(shape), s.major_bar), dtype=float)
        return np.broadcast_to(-(linear + offset) / cost.control_curvature, shape).copy()

    return _solve_first_order(lambda u: linear + cost.f0_u(t, x0, u, s.major_bar), shape, "major")


def minimize_minor(t: float, x: Any, adj: MinorAdjoint, x0: Any, spec: ModelSpec) -> np.ndarray:
    """
    Unique minimiser of u -> H(t, x, p, q, q_tilde, u, m, x0)

    Only f1 depends on the control, so no measure is read.
    """
    cost = spec.minor_cost
    linear = _minor_linear_term(t, adj, spec)
    shape = np.broadcast_shapes(np.shape(x), np.shape(linear), np.shape(x0))

    if cost.control_curvature is not None:
        offset = np.asarray(cost.f1_u(t, x, np.zeros(shape), x0), dtype=float)
        return np.broadcast_to(-(linear + offset) / cost.control_curvature, shape).copy()

    return _solve_first_order(lambda u: linear + cost.f1_u(t, x, u, x0), shape, "minor")
