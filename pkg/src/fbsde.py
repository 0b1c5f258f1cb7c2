"""
Forward-backward solver for the major/minor conditional McKean-Vlasov system
Euler forward sweeps, regression backward sweeps, damped Picard iteration and continuation in the coupling strength
"""

from dataclasses import dataclass, field, fields
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.stats import linregress
from sklearn.preprocessing import PolynomialFeatures

from .config import SolverConfig
from .errors import (
    ConfigError,
    ContinuationStalledError,
    DegenerateBasisError,
    ModelEvaluationError,
    NonConvergenceError,
    PicardDivergenceError,
    SizeMismatchError,
)
from .hamiltonian import (
    MajorAdjoint,
    MeasureSummary,
    MinorAdjoint,
    major_state_derivative,
    minimize_major,
    minimize_minor,
    minor_state_derivative,
    summarize,
    summarize_flow,
)
from .logger import get_logger
from .model import ModelSpec, coupling_budget
from .stochastics import ParticleEnsemble, PathBundle, TimeGrid, w2_squared_sorted


# ============================================================================
# Logger
# ============================================================================

logger = get_logger("mfg_solver.fbsde")

_TINY = 1e-300
FAST_CONVERGENCE_ITERATIONS = 5


# ============================================================================
# Inputs
# ============================================================================

@dataclass
class InputField:
    """
    Additive inputs of the perturbed system

    Major arrays are (K, n), minor arrays (K, M, n); terminal inputs g0 (K,) and g (K, M).
    """
    b0: np.ndarray
    sigma0: np.ndarray
    f0: np.ndarray
    g0: np.ndarray
    b: np.ndarray
    sigma: np.ndarray
    sigma_tilde: np.ndarray
    f: np.ndarray
    g: np.ndarray

    @classmethod
    def zeros(cls, n_scenarios: int, n_particles: int, n_steps: int) -> "InputField":
        major = (n_scenarios, n_steps)
        minor = (n_scenarios, n_particles, n_steps)
        return cls(
            b0=np.zeros(major), sigma0=np.zeros(major), f0=np.zeros(major), g0=np.zeros(n_scenarios),
            b=np.zeros(minor), sigma=np.zeros(minor), sigma_tilde=np.zeros(minor), f=np.zeros(minor),
            g=np.zeros((n_scenarios, n_particles)),
        )

    @classmethod
    def like(cls, bundle: PathBundle) -> "InputField":
        return cls.zeros(bundle.n_scenarios, bundle.n_particles, bundle.grid.n_steps)

    def _map(self, fn: Any, other: "InputField | None" = None) -> "InputField":
        if other is None:
            return InputField(**{f.name: fn(getattr(self, f.name)) for f in fields(self)})
        return InputField(**{f.name: fn(getattr(self, f.name), getattr(other, f.name)) for f in fields(self)})

    def __add__(self, other: "InputField") -> "InputField":
        return self._map(np.add, other)

    def __sub__(self, other: "InputField") -> "InputField":
        return self._map(np.subtract, other)

    def scaled(self, factor: float) -> "InputField":
        return self._map(lambda a: factor * a)

    def is_zero(self) -> bool:
        return all(not np.any(getattr(self, f.name)) for f in fields(self))

    def check(self, bundle: PathBundle) -> None:
        """
        Raises:
            SizeMismatchError: If any array does not match the bundle
            ModelEvaluationError: If any entry is not finite
        """
        expected = InputField.like(bundle)
        for f in fields(self):
            value = np.asarray(getattr(self, f.name))
            if value.shape != getattr(expected, f.name).shape:
                raise SizeMismatchError(
                    f"Input {f.name} has shape {value.shape}",
                    {"input": f.name, "expected": list(getattr(expected, f.name).shape)}
                )
            if not np.all(np.isfinite(value)):
                raise ModelEvaluationError(f"Input {f.name} contains non-finite values", {"input": f.name})


def input_norm(inputs: InputField, dt: float) -> float:
    """Discrete input norm: terminal second moments plus dt-weighted running second moments"""
    terminal = np.mean(inputs.g0 ** 2) + np.mean(inputs.g ** 2)
    running = 0.0
    for name in ("b0", "sigma0", "f0"):
        running += np.sum(np.mean(getattr(inputs, name) ** 2, axis=0))
    for name in ("b", "sigma", "sigma_tilde", "f"):
        running += np.sum(np.mean(getattr(inputs, name) ** 2, axis=(0, 1)))
    return float(np.sqrt(terminal + dt * running))


# ============================================================================
# Regression Basis and Backward Step
# ============================================================================

def live_columns(raw: np.ndarray) -> np.ndarray:
    """Raw feature columns with non-negligible spread; the others are zeroed before expansion"""
    spread = raw.std(axis=0)
    return spread > 1e-10 * (1.0 + np.abs(raw).mean(axis=0))


class RegressionBasis:
    """
    Polynomial regression features

    Major rows use raw features [X0, ensemble mean]; minor rows use [X, X0, ensemble mean].
    """

    def __init__(self, degree: int = 1):
        self.degree = degree
        self._major = PolynomialFeatures(degree=degree, include_bias=True).fit(np.zeros((1, 2)))
        self._minor = PolynomialFeatures(degree=degree, include_bias=True).fit(np.zeros((1, 3)))

    @property
    def n_major(self) -> int:
        return int(self._major.n_output_features_)

    @property
    def n_minor(self) -> int:
        return int(self._minor.n_output_features_)

    @property
    def major_powers(self) -> np.ndarray:
        return np.asarray(self._major.powers_)

    @property
    def minor_powers(self) -> np.ndarray:
        return np.asarray(self._minor.powers_)

    @staticmethod
    def _expand(poly: PolynomialFeatures, raw: np.ndarray, live: np.ndarray) -> np.ndarray:
        raw = np.where(live[None, :], raw, 0.0)
        return poly.transform(raw)

    def major(self, raw: np.ndarray, live: np.ndarray) -> np.ndarray:
        return self._expand(self._major, raw, live)

    def minor(self, raw: np.ndarray, live: np.ndarray) -> np.ndarray:
        return self._expand(self._minor, raw, live)


def row_dot(design: np.ndarray, coef: np.ndarray) -> np.ndarray:
    """Per-row inner product with a fixed summation order"""
    return (design * coef[None, :]).sum(axis=1)


def fit_least_squares(design: np.ndarray, target: np.ndarray, ridge: float, step: int) -> Tuple[np.ndarray, float]:
    """
    Ridge-regularised least squares on column-scaled normal equations

    Returns:
        (coefficients in unscaled units, root mean squared residual)

    Raises:
        DegenerateBasisError: If rows < live columns, the factorisation fails or the result is not finite
    """
    rows = design.shape[0]
    live = np.any(design != 0.0, axis=0)
    if rows < int(live.sum()):
        raise DegenerateBasisError(
            f"Regression at step {step} has fewer rows than live columns",
            {"step": step, "rows": rows, "columns": int(live.sum())}
        )

    scale = np.sqrt(np.mean(design ** 2, axis=0))
    scale[scale == 0.0] = 1.0
    scaled = design / scale
    gram = scaled.T @ scaled / rows + ridge * np.eye(design.shape[1])
    rhs = scaled.T @ target / rows
    try:
        coef = cho_solve(cho_factor(gram), rhs) / scale
    except (LinAlgError, ValueError) as e:
        raise DegenerateBasisError(f"Regression at step {step} is singular", {"step": step}) from e
    if not np.all(np.isfinite(coef)):
        raise DegenerateBasisError(f"Regression at step {step} returned non-finite coefficients", {"step": step})

    residual = float(np.sqrt(np.mean((row_dot(design, coef) - target) ** 2)))
    return coef, residual


@dataclass
class BackwardStep:
    """Fitted adjoint at one step: values on the regression rows plus coefficients"""
    p: np.ndarray
    z: List[np.ndarray]
    p_coef: np.ndarray
    z_coefs: List[np.ndarray]
    residual: float


def backward_step(
    step: int,
    p_next: np.ndarray,
    features: np.ndarray,
    increments: Sequence[np.ndarray],
    dt: float,
    generator: Any = 0.0,
    ridge: float = 1e-10
) -> BackwardStep:
    """
    One regression step of the adjoint equation dp = -generator dt + z dW

    p_{k+1} is regressed jointly on [features, features * dW_j / sqrt(dt)], giving
    E[p_{k+1} | F_k] and z_j = E[p_{k+1} dW_j | F_k] / dt as functions of the features.
    p_k is then the regression of E[p_{k+1} | F_k] + dt * generator on the features.

    Args:
        step: Step index k (used in error details)
        p_next: Adjoint values at step k+1, one per row
        features: Step-k design matrix (rows, F)
        increments: Brownian increments of step k, one array per integrand
        dt: Step size
        generator: Generator values at step k (scalar or per row)
        ridge: Ridge weight on the scaled normal equations

    Returns:
        BackwardStep with p_k, the integrands and their coefficients

    Raises:
        DegenerateBasisError: On a rank-deficient or non-finite regression
    """
    sqrt_dt = np.sqrt(dt)
    n_features = features.shape[1]
    blocks = [features] + [features * (np.asarray(dw) / sqrt_dt)[:, None] for dw in increments]
    coef, residual = fit_least_squares(np.hstack(blocks), np.asarray(p_next, dtype=float), ridge, step)

    mean_coef = coef[:n_features]
    z_coefs = [coef[(j + 1) * n_features:(j + 2) * n_features] / sqrt_dt for j in range(len(increments))]
    conditional = row_dot(features, mean_coef)
    target = conditional + dt * np.broadcast_to(np.asarray(generator, dtype=float), conditional.shape)
    p_coef, _ = fit_least_squares(features, target, ridge, step)

    return BackwardStep(
        p=row_dot(features, p_coef),
        z=[row_dot(features, c) for c in z_coefs],
        p_coef=p_coef,
        z_coefs=z_coefs,
        residual=residual,
    )


# ============================================================================
# Feedback Maps
# ============================================================================

@dataclass
class MajorMap:
    """Per-step coefficients of the major adjoint maps (n, F0)"""
    p: np.ndarray
    q: np.ndarray
    live: np.ndarray

    @classmethod
    def zeros(cls, n_steps: int, n_features: int) -> "MajorMap":
        return cls(np.zeros((n_steps, n_features)), np.zeros((n_steps, n_features)),
                   np.ones((n_steps, 2), dtype=bool))

    def damped(self, previous: "MajorMap", weight: float) -> "MajorMap":
        return MajorMap(
            p=weight * self.p + (1.0 - weight) * previous.p,
            q=weight * self.q + (1.0 - weight) * previous.q,
            live=self.live,
        )


@dataclass
class MinorMap:
    """Per-step coefficients of the minor adjoint maps (n, F)"""
    p: np.ndarray
    q: np.ndarray
    q_tilde: np.ndarray
    live: np.ndarray

    @classmethod
    def zeros(cls, n_steps: int, n_features: int) -> "MinorMap":
        shape = (n_steps, n_features)
        return cls(np.zeros(shape), np.zeros(shape), np.zeros(shape), np.ones((n_steps, 3), dtype=bool))

    def damped(self, previous: "MinorMap", weight: float) -> "MinorMap":
        return MinorMap(
            p=weight * self.p + (1.0 - weight) * previous.p,
            q=weight * self.q + (1.0 - weight) * previous.q,
            q_tilde=weight * self.q_tilde + (1.0 - weight) * previous.q_tilde,
            live=self.live,
        )


@dataclass
class FeedbackMaps:
    """Fitted conditional-expectation maps defining the adjoints as functions of the state"""
    basis: RegressionBasis
    major: MajorMap
    minor: MinorMap

    def major_adjoint(self, k: int, x0: Any, mean: Any) -> MajorAdjoint:
        shape = np.broadcast_shapes(np.shape(x0), np.shape(mean))
        raw = np.column_stack([np.broadcast_to(x0, shape).ravel(), np.broadcast_to(mean, shape).ravel()])
        design = self.basis.major(raw, self.major.live[k])
        return MajorAdjoint(
            p0=row_dot(design, self.major.p[k]).reshape(shape),
            q0=row_dot(design, self.major.q[k]).reshape(shape),
        )

    def minor_adjoint(self, k: int, x: Any, x0: Any, mean: Any) -> MinorAdjoint:
        shape = np.broadcast_shapes(np.shape(x), np.shape(x0), np.shape(mean))
        raw = np.column_stack([
            np.broadcast_to(x, shape).ravel(),
            np.broadcast_to(x0, shape).ravel(),
            np.broadcast_to(mean, shape).ravel(),
        ])
        design = self.basis.minor(raw, self.minor.live[k])
        return MinorAdjoint(
            p=row_dot(design, self.minor.p[k]).reshape(shape),
            q=row_dot(design, self.minor.q[k]).reshape(shape),
            q_tilde=row_dot(design, self.minor.q_tilde[k]).reshape(shape),
        )


# ============================================================================
# Euler Steps
# ============================================================================

def euler_major(spec: ModelSpec, t: float, dt: float, x0: Any, u0: Any, s: MeasureSummary, dw0: Any,
                gamma: float = 1.0, input_b: Any = None, input_sigma: Any = None) -> np.ndarray:
    """One explicit Euler step of the major state"""
    drift = spec.b0(t, x0, u0, s.b0)
    vol = spec.sigma0(t, x0, u0, s.sigma0)
    if gamma != 1.0:
        drift = gamma * drift
        vol = gamma * vol
    if input_b is not None:
        drift = drift + input_b
    if input_sigma is not None:
        vol = vol + input_sigma
    return x0 + drift * dt + vol * dw0


def euler_minor(spec: ModelSpec, t: float, dt: float, x: Any, u: Any, s: MeasureSummary, dw: Any, dw0: Any,
                gamma: float = 1.0, input_b: Any = None, input_sigma: Any = None,
                input_sigma_tilde: Any = None) -> np.ndarray:
    """One explicit Euler step of minor states; `s` must broadcast against x (see per_particle)"""
    drift = spec.b(t, x, u, s.b)
    vol = spec.sigma(t, x, u, s.sigma)
    vol_tilde = spec.sigma_tilde(t, x, u, s.sigma_tilde)
    if gamma != 1.0:
        drift = gamma * drift
        vol = gamma * vol
        vol_tilde = gamma * vol_tilde
    if input_b is not None:
        drift = drift + input_b
    if input_sigma is not None:
        vol = vol + input_sigma
    if input_sigma_tilde is not None:
        vol_tilde = vol_tilde + input_sigma_tilde
    return x + drift * dt + vol * dw + vol_tilde * dw0


# ============================================================================
# Solution Containers
# ============================================================================

@dataclass
class MajorPath:
    X0: np.ndarray
    p0: np.ndarray
    q0: np.ndarray
    u0: np.ndarray


@dataclass
class MinorPath:
    X: np.ndarray
    p: np.ndarray
    q: np.ndarray
    q_tilde: np.ndarray
    u: np.ndarray


@dataclass
class MajorSolution:
    """Converged major sweep under a frozen measure flow"""
    path: MajorPath
    maps: MajorMap
    iterations: int
    history: List[float]


@dataclass
class MinorSolution:
    """Converged representative-minor sweep under frozen major path and measure flow"""
    path: MinorPath
    maps: MinorMap
    iterations: int
    history: List[float]


@dataclass
class ContinuationRecord:
    gamma: float
    step: float
    iterations: int
    contraction_ratio: float
    distances: List[float]


@dataclass
class SolverDiagnostics:
    method: str
    gamma: float = 1.0
    outer_residuals: List[float] = field(default_factory=list)
    inner_iterations: List[Tuple[int, int]] = field(default_factory=list)
    continuation: List[ContinuationRecord] = field(default_factory=list)
    coupling_budget: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "method": self.method,
            "gamma": self.gamma,
            "outer_residuals": list(self.outer_residuals),
            "inner_iterations": [list(pair) for pair in self.inner_iterations],
            "continuation": [vars(record) for record in self.continuation],
            "coupling_budget": self.coupling_budget,
        }


@dataclass
class SolutionField:
    """
    Discrete solution of the coupled system on one bundle

    States and adjoints p are stored on all n+1 knots, controls and integrands on the n steps.
    `noise` is the bundle the field was computed on.
    """
    grid: TimeGrid
    X0: np.ndarray
    p0: np.ndarray
    q0: np.ndarray
    u0: np.ndarray
    X: np.ndarray
    p: np.ndarray
    q: np.ndarray
    q_tilde: np.ndarray
    u: np.ndarray
    maps: FeedbackMaps
    diagnostics: SolverDiagnostics
    seed: int = 0
    noise: PathBundle | None = None

    @property
    def n_scenarios(self) -> int:
        return int(self.X0.shape[0])

    @property
    def n_particles(self) -> int:
        return int(self.X.shape[1])

    def ensemble(self, step: int, scenario: int) -> ParticleEnsemble:
        return ParticleEnsemble(scenario_id=scenario, states=self.X[scenario, :, step])

    def mean_flow(self) -> np.ndarray:
        """Ensemble mean of the minor states per scenario and knot (K, n+1)"""
        return self.X.mean(axis=1)

    def quantities(self) -> Dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in SOLUTION_QUANTITIES}


SOLUTION_QUANTITIES = ("X0", "p0", "q0", "u0", "X", "p", "q", "q_tilde", "u")
_SUP_QUANTITIES = ("X0", "p0", "X", "p")
_INTEGRAL_QUANTITIES = ("u0", "q0", "u", "q", "q_tilde")


# ============================================================================
# Solution-Space Norm
# ============================================================================

def _snorm_squared(parts: Dict[str, np.ndarray], dt: float) -> float:
    sup = 0.0
    for name in _SUP_QUANTITIES:
        if name in parts:
            values = parts[name]
            sup = sup + np.mean(values ** 2, axis=tuple(range(values.ndim - 1)))
    integral = 0.0
    for name in _INTEGRAL_QUANTITIES:
        if name in parts:
            values = parts[name]
            integral += dt * float(np.sum(np.mean(values ** 2, axis=tuple(range(values.ndim - 1)))))
    return float(np.max(sup)) + integral if np.ndim(sup) else integral


def _check_compatible(a: SolutionField, b: SolutionField) -> None:
    if a.grid != b.grid:
        raise SizeMismatchError("Fields live on different grids", {"grids": [vars(a.grid), vars(b.grid)]})
    for name in SOLUTION_QUANTITIES:
        if getattr(a, name).shape != getattr(b, name).shape:
            raise SizeMismatchError(
                f"Field quantity {name} differs in shape",
                {"quantity": name, "shapes": [list(getattr(a, name).shape), list(getattr(b, name).shape)]}
            )


def snorm_distance(a: SolutionField, b: SolutionField) -> float:
    """
    Discrete solution-space distance

    sqrt( max_k [E dX0^2 + E dp0^2 + E dX^2 + E dp^2] + sum_k dt E[du0^2 + dq0^2 + du^2 + dq^2 + dq_tilde^2] )

    Raises:
        SizeMismatchError: If grids or array shapes differ
    """
    _check_compatible(a, b)
    diff = {name: getattr(a, name) - getattr(b, name) for name in SOLUTION_QUANTITIES}
    return float(np.sqrt(_snorm_squared(diff, a.grid.dt)))


def snorm_magnitude(a: SolutionField) -> float:
    """Solution-space norm of one field"""
    return float(np.sqrt(_snorm_squared(a.quantities(), a.grid.dt)))


def _relative(distance: float, magnitude: float) -> float:
    if distance == 0.0:
        return 0.0
    return distance / max(magnitude, _TINY)


def _path_change(new: Dict[str, np.ndarray], old: Dict[str, np.ndarray], dt: float) -> float:
    diff = {name: new[name] - old[name] for name in new}
    return _relative(np.sqrt(_snorm_squared(diff, dt)), np.sqrt(_snorm_squared(new, dt)))


# ============================================================================
# Sweeps
# ============================================================================

@dataclass
class _Problem:
    """Everything a sweep needs besides the iterate"""
    spec: ModelSpec
    bundle: PathBundle
    cfg: SolverConfig
    basis: RegressionBasis
    gamma: float = 1.0
    inputs: InputField | None = None

    @property
    def grid(self) -> TimeGrid:
        return self.bundle.grid

    @property
    def n(self) -> int:
        return self.bundle.grid.n_steps

    @property
    def dt(self) -> float:
        return self.bundle.grid.dt

    def input_at(self, name: str, k: int | None = None) -> Any:
        if self.inputs is None:
            return None
        value = getattr(self.inputs, name)
        return value if k is None else value[..., k]


@dataclass
class _FrozenFlow:
    """Measure flow with its per-knot summaries computed once"""
    states: np.ndarray
    summaries: List[MeasureSummary]
    means: List[np.ndarray]

    @classmethod
    def of(cls, spec: ModelSpec, grid: TimeGrid, states: np.ndarray) -> "_FrozenFlow":
        summaries = summarize_flow(spec, grid, states)
        return cls(states=states, summaries=summaries, means=[s.mean for s in summaries])


def _forward_major(pb: _Problem, maps: FeedbackMaps, flow: _FrozenFlow) -> MajorPath:
    K, n = pb.bundle.n_scenarios, pb.n
    X0 = np.empty((K, n + 1))
    p0 = np.empty((K, n + 1))
    q0 = np.empty((K, n))
    u0 = np.empty((K, n))
    X0[:, 0] = pb.bundle.xi0

    for k in range(n):
        t = pb.grid.time(k)
        s = flow.summaries[k]
        adj = maps.major_adjoint(k, X0[:, k], flow.means[k])
        p0[:, k], q0[:, k] = adj.p0, adj.q0
        u0[:, k] = minimize_major(t, X0[:, k], adj, s, pb.spec)
        X0[:, k + 1] = euler_major(
            pb.spec, t, pb.dt, X0[:, k], u0[:, k], s, pb.bundle.dW0[:, k], pb.gamma,
            pb.input_at("b0", k), pb.input_at("sigma0", k)
        )

    terminal = np.asarray(pb.spec.major_cost.g0_x(X0[:, n], flow.summaries[n].major_bar), dtype=float)
    p0[:, n] = pb.gamma * terminal if pb.gamma != 1.0 else terminal
    if pb.inputs is not None:
        p0[:, n] = p0[:, n] + pb.inputs.g0
    return MajorPath(X0=X0, p0=p0, q0=q0, u0=u0)


def _backward_major(pb: _Problem, path: MajorPath, flow: _FrozenFlow) -> MajorMap:
    n = pb.n
    maps = MajorMap.zeros(n, pb.basis.n_major)
    p_next = path.p0[:, n]

    for k in reversed(range(n)):
        t = pb.grid.time(k)
        raw = np.column_stack([path.X0[:, k], flow.means[k]])
        live = live_columns(raw)
        features = pb.basis.major(raw, live)

        generator = 0.0
        if pb.gamma != 0.0:
            generator = pb.gamma * major_state_derivative(
                t, path.X0[:, k], MajorAdjoint(path.p0[:, k], path.q0[:, k]), path.u0[:, k],
                flow.summaries[k], pb.spec
            )
        if pb.inputs is not None:
            generator = generator + pb.inputs.f0[:, k]

        result = backward_step(k, p_next, features, [pb.bundle.dW0[:, k]], pb.dt, generator, pb.cfg.ridge)
        maps.p[k], maps.q[k], maps.live[k] = result.p_coef, result.z_coefs[0], live
        p_next = result.p
    return maps


def _forward_minor(pb: _Problem, maps: FeedbackMaps, X0: np.ndarray, flow: _FrozenFlow) -> MinorPath:
    K, M, n = pb.bundle.n_scenarios, pb.bundle.n_particles, pb.n
    X = np.empty((K, M, n + 1))
    p = np.empty((K, M, n + 1))
    q = np.empty((K, M, n))
    q_tilde = np.empty((K, M, n))
    u = np.empty((K, M, n))
    X[:, :, 0] = pb.bundle.xi

    for k in range(n):
        t = pb.grid.time(k)
        s = flow.summaries[k].per_particle()
        x0 = X0[:, k, None]
        adj = maps.minor_adjoint(k, X[:, :, k], x0, flow.means[k][:, None])
        p[:, :, k], q[:, :, k], q_tilde[:, :, k] = adj.p, adj.q, adj.q_tilde
        u[:, :, k] = minimize_minor(t, X[:, :, k], adj, x0, pb.spec)
        X[:, :, k + 1] = euler_minor(
            pb.spec, t, pb.dt, X[:, :, k], u[:, :, k], s, pb.bundle.dW[:, :, k], pb.bundle.dW0[:, k, None],
            pb.gamma, pb.input_at("b", k), pb.input_at("sigma", k), pb.input_at("sigma_tilde", k)
        )

    s_n = flow.summaries[n].per_particle()
    terminal = np.asarray(pb.spec.minor_cost.g_x(X[:, :, n], s_n.minor_bar, X0[:, n, None]), dtype=float)
    p[:, :, n] = pb.gamma * terminal if pb.gamma != 1.0 else terminal
    if pb.inputs is not None:
        p[:, :, n] = p[:, :, n] + pb.inputs.g
    return MinorPath(X=X, p=p, q=q, q_tilde=q_tilde, u=u)


def _backward_minor(pb: _Problem, path: MinorPath, X0: np.ndarray, flow: _FrozenFlow) -> MinorMap:
    K, M, n = pb.bundle.n_scenarios, pb.bundle.n_particles, pb.n
    maps = MinorMap.zeros(n, pb.basis.n_minor)
    p_next = path.p[:, :, n].ravel()

    for k in reversed(range(n)):
        t = pb.grid.time(k)
        x0 = np.broadcast_to(X0[:, k, None], (K, M))
        mean = np.broadcast_to(flow.means[k][:, None], (K, M))
        raw = np.column_stack([path.X[:, :, k].ravel(), x0.ravel(), mean.ravel()])
        live = live_columns(raw)
        features = pb.basis.minor(raw, live)

        generator = 0.0
        if pb.gamma != 0.0:
            adj = MinorAdjoint(path.p[:, :, k], path.q[:, :, k], path.q_tilde[:, :, k])
            generator = pb.gamma * minor_state_derivative(
                t, path.X[:, :, k], adj, path.u[:, :, k], X0[:, k, None],
                flow.summaries[k].per_particle(), pb.spec
            ).ravel()
        if pb.inputs is not None:
            generator = generator + pb.inputs.f[:, :, k].ravel()

        increments = [pb.bundle.dW[:, :, k].ravel(), np.repeat(pb.bundle.dW0[:, k], M)]
        result = backward_step(k, p_next, features, increments, pb.dt, generator, pb.cfg.ridge)
        maps.p[k], maps.q[k], maps.q_tilde[k] = result.p_coef, result.z_coefs[0], result.z_coefs[1]
        maps.live[k] = live
        p_next = result.p
    return maps


# ============================================================================
# Frozen-Flow Picard Solvers
# ============================================================================

def _basis_of(cfg: SolverConfig) -> RegressionBasis:
    return RegressionBasis(cfg.basis_degree)


def _static_flow(bundle: PathBundle) -> np.ndarray:
    return np.repeat(bundle.xi[:, :, None], bundle.grid.n_steps + 1, axis=2)


def _major_parts(path: MajorPath) -> Dict[str, np.ndarray]:
    return {"X0": path.X0, "p0": path.p0, "u0": path.u0, "q0": path.q0}


def _minor_parts(path: MinorPath) -> Dict[str, np.ndarray]:
    return {"X": path.X, "p": path.p, "u": path.u, "q": path.q, "q_tilde": path.q_tilde}


def _diverging(history: List[float], patience: int) -> bool:
    if len(history) <= patience:
        return False
    tail = history[-(patience + 1):]
    return all(later > earlier for earlier, later in zip(tail, tail[1:]))


def _picard_major(pb: _Problem, flow: _FrozenFlow, warm: MajorMap | None) -> MajorSolution:
    cfg = pb.cfg
    empty_minor = MinorMap.zeros(pb.n, pb.basis.n_minor)
    maps = warm if warm is not None else MajorMap.zeros(pb.n, pb.basis.n_major)
    fresh = warm is None
    previous: MajorPath | None = None
    history: List[float] = []

    for iteration in range(1, cfg.max_picard + 1):
        path = _forward_major(pb, FeedbackMaps(pb.basis, maps, empty_minor), flow)
        if previous is not None:
            change = _path_change(_major_parts(path), _major_parts(previous), pb.dt)
            history.append(change)
            logger.debug("Major sweep", extra={"extra": {"iteration": iteration, "change": change}})
            if change <= cfg.picard_tol:
                return MajorSolution(path=path, maps=maps, iterations=iteration, history=history)
            if _diverging(history, cfg.divergence_patience):
                raise PicardDivergenceError(
                    "Major Picard iteration diverges; try continuation", {"history": history}
                )
        new_maps = _backward_major(pb, path, flow)
        maps = new_maps if fresh else new_maps.damped(maps, cfg.picard_damping)
        fresh = False
        previous = path

    raise NonConvergenceError(
        f"Major Picard iteration did not converge in {cfg.max_picard} iterations", {"history": history}
    )


def _picard_minor(pb: _Problem, X0: np.ndarray, flow: _FrozenFlow, warm: MinorMap | None) -> MinorSolution:
    cfg = pb.cfg
    empty_major = MajorMap.zeros(pb.n, pb.basis.n_major)
    maps = warm if warm is not None else MinorMap.zeros(pb.n, pb.basis.n_minor)
    fresh = warm is None
    previous: MinorPath | None = None
    history: List[float] = []

    for iteration in range(1, cfg.max_picard + 1):
        path = _forward_minor(pb, FeedbackMaps(pb.basis, empty_major, maps), X0, flow)
        if previous is not None:
            change = _path_change(_minor_parts(path), _minor_parts(previous), pb.dt)
            history.append(change)
            logger.debug("Minor sweep", extra={"extra": {"iteration": iteration, "change": change}})
            if change <= cfg.picard_tol:
                return MinorSolution(path=path, maps=maps, iterations=iteration, history=history)
            if _diverging(history, cfg.divergence_patience):
                raise PicardDivergenceError(
                    "Minor Picard iteration diverges; try continuation", {"history": history}
                )
        new_maps = _backward_minor(pb, path, X0, flow)
        maps = new_maps if fresh else new_maps.damped(maps, cfg.picard_damping)
        fresh = False
        previous = path

    raise NonConvergenceError(
        f"Minor Picard iteration did not converge in {cfg.max_picard} iterations", {"history": history}
    )


def solve_Pm(
    spec: ModelSpec,
    m_flow: np.ndarray,
    bundle: PathBundle,
    cfg: SolverConfig,
    gamma: float = 1.0,
    inputs: InputField | None = None,
    warm: MajorMap | None = None
) -> MajorSolution:
    """
    Major agent's control problem under a frozen measure flow

    Args:
        spec: Model instance
        m_flow: Minor particle states (K, M, n+1) defining the frozen flow
        bundle: Noise and initial states
        cfg: Solver controls (damping, tolerance, iteration cap, basis)
        gamma: Coupling strength of the perturbed system (1 = original problem)
        inputs: Additive inputs of the perturbed system
        warm: Coefficients to start from

    Returns:
        MajorSolution whose arrays come from a forward sweep with its stored maps

    Raises:
        NonConvergenceError: After max_picard sweeps, with the change history
        PicardDivergenceError: If the change grows for divergence_patience sweeps
    """
    pb = _Problem(spec, bundle, cfg, _basis_of(cfg), gamma, inputs)
    return _picard_major(pb, _FrozenFlow.of(spec, bundle.grid, m_flow), warm)


def solve_PX0m(
    spec: ModelSpec,
    X0_path: np.ndarray,
    m_flow: np.ndarray,
    bundle: PathBundle,
    cfg: SolverConfig,
    gamma: float = 1.0,
    inputs: InputField | None = None,
    warm: MinorMap | None = None
) -> MinorSolution:
    """
    Representative minor agent's problem under a frozen major path (K, n+1) and measure flow

    Raises:
        NonConvergenceError: After max_picard sweeps
        PicardDivergenceError: If the change grows for divergence_patience sweeps
    """
    pb = _Problem(spec, bundle, cfg, _basis_of(cfg), gamma, inputs)
    return _picard_minor(pb, X0_path, _FrozenFlow.of(spec, bundle.grid, m_flow), warm)


# ============================================================================
# Coupled Solvers
# ============================================================================

def consistency_residual(X: np.ndarray, m_flow: np.ndarray) -> float:
    """
    sqrt(max_k mean_s W2^2(X_k, m_k)) relative to sqrt(max_k E X_k^2)
    """
    w2 = w2_squared_sorted(np.moveaxis(X, -1, 1), np.moveaxis(m_flow, -1, 1)).mean(axis=0)
    scale = np.sqrt(np.max(np.mean(X ** 2, axis=(0, 1))))
    return _relative(float(np.sqrt(np.max(w2))), float(scale))


def _assemble(pb: _Problem, major: MajorSolution, minor: MinorSolution,
              diagnostics: SolverDiagnostics) -> SolutionField:
    return SolutionField(
        grid=pb.grid,
        X0=major.path.X0, p0=major.path.p0, q0=major.path.q0, u0=major.path.u0,
        X=minor.path.X, p=minor.path.p, q=minor.path.q, q_tilde=minor.path.q_tilde, u=minor.path.u,
        maps=FeedbackMaps(pb.basis, major.maps, minor.maps),
        diagnostics=diagnostics,
        seed=pb.bundle.seed,
        noise=pb.bundle,
    )


def _warn_budget(spec: ModelSpec, cfg: SolverConfig) -> float:
    budget = coupling_budget(spec)
    if budget > cfg.coupling_delta:
        logger.warning(
            "Coupling budget exceeds the configured delta; unique solvability is not certified",
            extra={"extra": {"coupling_budget": budget, "delta": cfg.coupling_delta, "model": spec.name}}
        )
    return budget


def _coupled_iteration(pb: _Problem, warm: SolutionField | None, method: str) -> SolutionField:
    cfg = pb.cfg
    diagnostics = SolverDiagnostics(method=method, gamma=pb.gamma, coupling_budget=coupling_budget(pb.spec))

    if warm is None:
        # predictor: a static flow at the initial law, then the resulting particles as the first flow
        static = _FrozenFlow.of(pb.spec, pb.grid, _static_flow(pb.bundle))
        major = _picard_major(pb, static, None)
        minor = _picard_minor(pb, major.path.X0, static, None)
        diagnostics.inner_iterations.append((major.iterations, minor.iterations))
        m_flow = minor.path.X
        major_maps, minor_maps = major.maps, minor.maps
    else:
        m_flow = warm.X.copy()
        major_maps, minor_maps = warm.maps.major, warm.maps.minor

    for iteration in range(1, cfg.max_picard + 1):
        flow = _FrozenFlow.of(pb.spec, pb.grid, m_flow)
        major = _picard_major(pb, flow, major_maps)
        minor = _picard_minor(pb, major.path.X0, flow, minor_maps)
        major_maps, minor_maps = major.maps, minor.maps
        diagnostics.inner_iterations.append((major.iterations, minor.iterations))

        residual = consistency_residual(minor.path.X, m_flow)
        diagnostics.outer_residuals.append(residual)
        logger.debug(
            "Coupled Picard iteration",
            extra={"extra": {"iteration": iteration, "residual": residual, "gamma": pb.gamma}}
        )
        if residual <= cfg.picard_tol:
            return _assemble(pb, major, minor, diagnostics)
        if _diverging(diagnostics.outer_residuals, cfg.divergence_patience):
            raise PicardDivergenceError(
                "Picard divergence; try continuation",
                {"history": diagnostics.outer_residuals, "gamma": pb.gamma}
            )
        m_flow = cfg.picard_damping * minor.path.X + (1.0 - cfg.picard_damping) * m_flow

    raise NonConvergenceError(
        f"Coupled Picard iteration did not converge in {cfg.max_picard} iterations",
        {"history": diagnostics.outer_residuals, "gamma": pb.gamma}
    )


def solve_coupled_picard(spec: ModelSpec, bundle: PathBundle, cfg: SolverConfig,
                         warm: SolutionField | None = None) -> SolutionField:
    """
    Solve the coupled major/minor system by damped Picard iteration on the measure flow

    Each outer iteration solves the major problem and then the minor problem under the
    current flow, and moves the flow toward the new minor particles with damping.

    Raises:
        PicardDivergenceError: If the consistency residual grows for divergence_patience iterations
        NonConvergenceError: After max_picard outer iterations
    """
    _warn_budget(spec, cfg)
    pb = _Problem(spec, bundle, cfg, _basis_of(cfg))
    result = _coupled_iteration(pb, warm, "picard")
    logger.info(
        "Coupled Picard solve converged",
        extra={"extra": {"model": spec.name, "iterations": len(result.diagnostics.outer_residuals),
                         "residual": result.diagnostics.outer_residuals[-1]}}
    )
    return result


def solve_perturbed(
    spec: ModelSpec,
    gamma: float,
    inputs: InputField | None,
    bundle: PathBundle,
    cfg: SolverConfig,
    warm: SolutionField | None = None
) -> SolutionField:
    """
    Solve the gamma-scaled system with additive inputs

    At gamma = 0 nothing couples: states integrate the inputs and adjoints are
    conditional expectations of them, computed in a single sweep.

    Args:
        spec: Model instance
        gamma: Coupling strength in [0, 1]
        inputs: Additive inputs (None for zero inputs)
        bundle: Noise and initial states (xi0, xi)
        cfg: Solver controls
        warm: Field whose maps and particles start the iteration

    Raises:
        ConfigError: If gamma is outside [0, 1]
        PicardDivergenceError, NonConvergenceError: As solve_coupled_picard
    """
    if not 0.0 <= gamma <= 1.0:
        raise ConfigError(f"gamma must lie in [0, 1], got {gamma}", {"gamma": gamma})
    if inputs is not None:
        inputs.check(bundle)
        if inputs.is_zero():
            inputs = None

    pb = _Problem(spec, bundle, cfg, _basis_of(cfg), gamma, inputs)
    if gamma != 0.0:
        return _coupled_iteration(pb, warm, "perturbed")

    diagnostics = SolverDiagnostics(method="perturbed", gamma=0.0, coupling_budget=coupling_budget(spec))
    basis = pb.basis
    static = _FrozenFlow.of(spec, pb.grid, _static_flow(bundle))
    zero_major = MajorMap.zeros(pb.n, basis.n_major)
    zero_minor = MinorMap.zeros(pb.n, basis.n_minor)
    zero_maps = FeedbackMaps(basis, zero_major, zero_minor)

    # states do not depend on adjoints or on the flow at gamma = 0
    X0 = _forward_major(pb, zero_maps, static).X0
    flow = _FrozenFlow.of(spec, pb.grid, _forward_minor(pb, zero_maps, X0, static).X)

    major_probe = _forward_major(pb, zero_maps, flow)
    minor_probe = _forward_minor(pb, zero_maps, X0, flow)
    maps = FeedbackMaps(basis, _backward_major(pb, major_probe, flow), _backward_minor(pb, minor_probe, X0, flow))

    major = MajorSolution(_forward_major(pb, maps, flow), maps.major, 1, [])
    minor = MinorSolution(_forward_minor(pb, maps, X0, flow), maps.minor, 1, [])
    diagnostics.inner_iterations.append((1, 1))
    diagnostics.outer_residuals.append(0.0)
    return _assemble(pb, major, minor, diagnostics)


def forward_field(spec: ModelSpec, maps: FeedbackMaps, bundle: PathBundle,
                  diagnostics: SolverDiagnostics | None = None) -> SolutionField:
    """
    Simulate major and minor particles under fixed feedback maps, each step reading the
    measure from the particles themselves

    Used to push solved or closed-form maps onto another bundle (for instance more particles).
    """
    grid = bundle.grid
    K, M, n, dt = bundle.n_scenarios, bundle.n_particles, grid.n_steps, grid.dt
    X0, p0 = np.empty((K, n + 1)), np.empty((K, n + 1))
    q0, u0 = np.empty((K, n)), np.empty((K, n))
    X, p = np.empty((K, M, n + 1)), np.empty((K, M, n + 1))
    q, q_tilde, u = np.empty((K, M, n)), np.empty((K, M, n)), np.empty((K, M, n))
    X0[:, 0] = bundle.xi0
    X[:, :, 0] = bundle.xi

    for k in range(n):
        t = grid.time(k)
        s = summarize(spec, t, X[:, :, k])
        adj0 = maps.major_adjoint(k, X0[:, k], s.mean)
        p0[:, k], q0[:, k] = adj0.p0, adj0.q0
        u0[:, k] = minimize_major(t, X0[:, k], adj0, s, spec)
        x0 = X0[:, k, None]
        adj = maps.minor_adjoint(k, X[:, :, k], x0, s.mean[:, None])
        p[:, :, k], q[:, :, k], q_tilde[:, :, k] = adj.p, adj.q, adj.q_tilde
        u[:, :, k] = minimize_minor(t, X[:, :, k], adj, x0, spec)
        X0[:, k + 1] = euler_major(spec, t, dt, X0[:, k], u0[:, k], s, bundle.dW0[:, k])
        X[:, :, k + 1] = euler_minor(
            spec, t, dt, X[:, :, k], u[:, :, k], s.per_particle(), bundle.dW[:, :, k], bundle.dW0[:, k, None]
        )

    s_n = summarize(spec, grid.horizon, X[:, :, n])
    p0[:, n] = spec.major_cost.g0_x(X0[:, n], s_n.major_bar)
    p[:, :, n] = spec.minor_cost.g_x(X[:, :, n], s_n.minor_bar[:, None], X0[:, n, None])
    return SolutionField(
        grid=grid, X0=X0, p0=p0, q0=q0, u0=u0, X=X, p=p, q=q, q_tilde=q_tilde, u=u,
        maps=maps,
        diagnostics=diagnostics if diagnostics is not None else SolverDiagnostics(method="forward"),
        seed=bundle.seed,
        noise=bundle,
    )


# ============================================================================
# Continuation
# ============================================================================

def coefficients_along(spec: ModelSpec, current: SolutionField) -> InputField:
    """
    Drift, diffusion, state-derivative and terminal-derivative values along a field

    These are the quantities the continuation map scales by the step size.
    """
    grid = current.grid
    K, M, n = current.n_scenarios, current.n_particles, grid.n_steps
    out = InputField.zeros(K, M, n)

    for k in range(n):
        t = grid.time(k)
        s = summarize(spec, t, current.X[:, :, k])
        sp = s.per_particle()
        x0 = current.X0[:, k]
        out.b0[:, k] = spec.b0(t, x0, current.u0[:, k], s.b0)
        out.sigma0[:, k] = spec.sigma0(t, x0, current.u0[:, k], s.sigma0)
        out.f0[:, k] = major_state_derivative(
            t, x0, MajorAdjoint(current.p0[:, k], current.q0[:, k]), current.u0[:, k], s, spec
        )
        x, u = current.X[:, :, k], current.u[:, :, k]
        out.b[:, :, k] = spec.b(t, x, u, sp.b)
        out.sigma[:, :, k] = spec.sigma(t, x, u, sp.sigma)
        out.sigma_tilde[:, :, k] = spec.sigma_tilde(t, x, u, sp.sigma_tilde)
        out.f[:, :, k] = minor_state_derivative(
            t, x, MinorAdjoint(current.p[:, :, k], current.q[:, :, k], current.q_tilde[:, :, k]), u,
            x0[:, None], sp, spec
        )

    s_n = summarize(spec, grid.horizon, current.X[:, :, n])
    out.g0[:] = spec.major_cost.g0_x(current.X0[:, n], s_n.major_bar)
    out.g[:] = spec.minor_cost.g_x(current.X[:, :, n], s_n.minor_bar[:, None], current.X0[:, n, None])
    return out


def phi_map(
    current: SolutionField,
    gamma: float,
    eta: float,
    base_inputs: InputField | None,
    spec: ModelSpec,
    bundle: PathBundle,
    cfg: SolverConfig
) -> SolutionField:
    """
    Continuation map: solve the gamma-system with inputs eta * (coefficients along current) + base

    Its fixed point solves the (gamma + eta)-system with the base inputs.
    """
    hatted = coefficients_along(spec, current).scaled(eta)
    if base_inputs is not None:
        hatted = hatted + base_inputs
    return solve_perturbed(spec, gamma, hatted, bundle, cfg, warm=current if gamma > 0.0 else None)


def _phi_fixed_point(spec: ModelSpec, start: SolutionField, gamma: float, eta: float,
                     base_inputs: InputField | None, bundle: PathBundle,
                     cfg: SolverConfig) -> Tuple[SolutionField, ContinuationRecord]:
    current = start
    distances: List[float] = []
    relative: List[float] = []

    for iteration in range(1, cfg.max_phi_iterations + 1):
        image = phi_map(current, gamma, eta, base_inputs, spec, bundle, cfg)
        distance = snorm_distance(image, current)
        distances.append(distance)
        relative.append(_relative(distance, snorm_magnitude(image)))
        current = image

        if relative[-1] <= cfg.picard_tol:
            ratios = [
                later / earlier for earlier, later in zip(distances, distances[1:])
                if earlier > 1e-14 * max(snorm_magnitude(image), 1.0)
            ]
            ratio = max(ratios) if ratios else 0.0
            return current, ContinuationRecord(gamma, eta, iteration, float(ratio), distances)
        if _diverging(relative, cfg.divergence_patience):
            raise PicardDivergenceError(
                "Continuation map is not contracting",
                {"gamma": gamma, "step": eta, "distances": distances}
            )

    raise NonConvergenceError(
        f"Continuation map did not reach its fixed point in {cfg.max_phi_iterations} iterations",
        {"gamma": gamma, "step": eta, "distances": distances}
    )


def solve_continuation(spec: ModelSpec, bundle: PathBundle, cfg: SolverConfig,
                       base_inputs: InputField | None = None) -> SolutionField:
    """
    March the coupling strength from 0 to 1, iterating the continuation map to a fixed point at each step

    The step starts at continuation_step (or at 1 for a model with zero coupling budget), halves
    after a failed step and doubles back up to continuation_step after fast convergence.

    Raises:
        ContinuationStalledError: If the step falls below min_step, with the blocking gamma
    """
    budget = _warn_budget(spec, cfg)
    field_ = solve_perturbed(spec, 0.0, base_inputs, bundle, cfg)
    records: List[ContinuationRecord] = []
    gamma = 0.0
    eta = 1.0 if budget == 0.0 else cfg.continuation_step

    while gamma < 1.0:
        eta = min(eta, 1.0 - gamma)
        try:
            candidate, record = _phi_fixed_point(spec, field_, gamma, eta, base_inputs, bundle, cfg)
        except (NonConvergenceError, PicardDivergenceError) as e:
            logger.info(
                "Continuation step rejected; halving",
                extra={"extra": {"gamma": gamma, "step": eta, "reason": e.code}}
            )
            eta *= 0.5
            if eta < cfg.min_step:
                raise ContinuationStalledError(
                    f"Continuation stalled at gamma = {gamma:.6g}",
                    {"gamma": gamma, "step": eta, "records": [vars(r) for r in records]}
                ) from e
            continue

        gamma = 1.0 if gamma + eta >= 1.0 - 1e-12 else gamma + eta
        field_ = candidate
        records.append(record)
        logger.debug(
            "Continuation step accepted",
            extra={"extra": {"gamma": gamma, "step": eta, "iterations": record.iterations,
                             "ratio": record.contraction_ratio}}
        )
        if record.iterations <= FAST_CONVERGENCE_ITERATIONS:
            eta = min(2.0 * eta, max(cfg.continuation_step, eta))

    field_.diagnostics = SolverDiagnostics(
        method="continuation", gamma=1.0, continuation=records, coupling_budget=budget,
        outer_residuals=[r.distances[-1] for r in records],
    )
    logger.info(
        "Continuation solve finished",
        extra={"extra": {"model": spec.name, "steps": len(records),
                         "ratios": [r.contraction_ratio for r in records]}}
    )
    return field_


# ============================================================================
# Input Stability
# ============================================================================

@dataclass
class StabilityReport:
    """Solution distance against input-perturbation size"""
    hs: List[float]
    input_norms: List[float]
    distances: List[float]
    slope: float
    intercept: float

    @property
    def constants(self) -> List[float]:
        return [d / h for d, h in zip(self.distances, self.input_norms)]


def stability_sweep(
    spec: ModelSpec,
    bundle: PathBundle,
    cfg: SolverConfig,
    hs: Sequence[float] = (1e-2, 3e-2, 1e-1),
    direction: InputField | None = None
) -> StabilityReport:
    """
    Perturb the inputs of the full system along `direction` with norms hs and fit
    log(solution distance) against log(input norm)

    Args:
        spec: Model instance
        bundle: Noise and initial states
        cfg: Solver controls
        hs: Input-norm sizes (at least 2)
        direction: Input direction (default: every component equal to 1)
    """
    if len(hs) < 2:
        raise ConfigError("stability_sweep needs at least two sizes", {"hs": list(hs)})
    dt = bundle.grid.dt
    if direction is None:
        direction = InputField.like(bundle)._map(np.ones_like)
    unit = direction.scaled(1.0 / input_norm(direction, dt))

    base = solve_perturbed(spec, 1.0, None, bundle, cfg)
    norms, distances = [], []
    for h in hs:
        perturbed = solve_perturbed(spec, 1.0, unit.scaled(h), bundle, cfg, warm=base)
        norms.append(h)
        distances.append(snorm_distance(perturbed, base))

    fit = linregress(np.log(norms), np.log(distances))
    report = StabilityReport(list(hs), norms, distances, float(fit.slope), float(fit.intercept))
    logger.info(
        "Input stability sweep finished",
        extra={"extra": {"slope": report.slope, "distances": distances}}
    )
    return report
