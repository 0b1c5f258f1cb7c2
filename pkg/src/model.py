"""
Problem-instance data model for major/minor mean field games
Linear state coefficients, separable costs, standing constants, initial laws and Monte Carlo assumption checks
"""

from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Literal, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .errors import AssumptionViolation, ConfigError, ModelEvaluationError
from .logger import get_logger


# ============================================================================
# Logger
# ============================================================================

logger = get_logger("mfg_solver.model")

Kernel = Callable[[float, np.ndarray], np.ndarray]
TimeFunction = Callable[[float], float]

FD_RELATIVE_STEP = 1e-6
_EPS = np.finfo(float).eps


# ============================================================================
# Scalar-Form Measure Evaluation
# ============================================================================

def identity_kernel(t: float, y: np.ndarray) -> np.ndarray:
    """Kernel whose scalar-form average is the ensemble mean"""
    return y


def constant_kernel(value: float) -> Kernel:
    """Kernel that ignores the particle position"""
    def kernel(t: float, y: np.ndarray) -> np.ndarray:
        return np.full(np.shape(y), value, dtype=float)
    kernel.__name__ = f"constant_{value}"
    return kernel


def affine_kernel(intercept: float, slope: float) -> Kernel:
    """Kernel y -> intercept + slope * y"""
    def kernel(t: float, y: np.ndarray) -> np.ndarray:
        return intercept + slope * np.asarray(y, dtype=float)
    kernel.__name__ = f"affine_{intercept}_{slope}"
    return kernel


def evaluate_kernel(kernel: Kernel, t: float, states: np.ndarray) -> np.ndarray:
    """
    Evaluate a kernel on particle states, broadcasting scalar returns

    Raises:
        ModelEvaluationError: If any value is not finite
    """
    states = np.asarray(states, dtype=float)
    values = np.broadcast_to(np.asarray(kernel(t, states), dtype=float), states.shape)
    if not np.all(np.isfinite(values)):
        idx = np.unravel_index(np.argmin(np.isfinite(values)), values.shape)
        raise ModelEvaluationError(
            "Kernel returned a non-finite value",
            {"kernel": getattr(kernel, "__name__", repr(kernel)), "t": t,
             "y": float(states[idx]), "index": [int(i) for i in idx]}
        )
    return values


def kernel_average(kernel: Kernel, t: float, states: np.ndarray) -> np.ndarray:
    """
    Uniform average of kernel(t, y) over the last axis of `states`

    Rows whose kernel values are all equal return that value exactly, so a
    constant kernel yields bit-identical intercepts for any ensemble size.
    """
    values = evaluate_kernel(kernel, t, states)
    average = values.mean(axis=-1)
    constant = np.ptp(values, axis=-1) == 0.0
    return np.where(constant, values[..., 0], average)


# ============================================================================
# Derivative Fallback
# ============================================================================

def finite_difference(fn: Callable[..., Any], argnum: int) -> Callable[..., np.ndarray]:
    """
    Central-difference derivative of fn in positional argument `argnum`

    The step is 1e-6 * (1 + |x|) per point.
    """
    def derivative(*args: Any) -> np.ndarray:
        x = np.asarray(args[argnum], dtype=float)
        h = FD_RELATIVE_STEP * (1.0 + np.abs(x))
        up = list(args)
        down = list(args)
        up[argnum] = x + h
        down[argnum] = x - h
        return (np.asarray(fn(*up), dtype=float) - np.asarray(fn(*down), dtype=float)) / (2.0 * h)

    derivative.__name__ = f"fd_{getattr(fn, '__name__', 'fn')}_{argnum}"
    derivative.is_finite_difference = True  # type: ignore[attr-defined]
    return derivative


def _is_fd(fn: Callable[..., Any]) -> bool:
    return bool(getattr(fn, "is_finite_difference", False))


# ============================================================================
# Coefficients and Costs
# ============================================================================

@dataclass(frozen=True)
class LinearCoefficient:
    """
    phi(t, x, u, m) = mean_m[intercept_kernel(t, .)] + slope_x(t) x + slope_u(t) u
    """
    name: str
    intercept_kernel: Kernel
    slope_x: TimeFunction
    slope_u: TimeFunction

    def intercept(self, t: float, states: np.ndarray) -> np.ndarray:
        """Scalar-form intercept of each ensemble (last axis = particles)"""
        return kernel_average(self.intercept_kernel, t, states)

    def __call__(self, t: float, x: Any, u: Any, intercept: Any) -> np.ndarray:
        return intercept + self.slope_x(t) * np.asarray(x) + self.slope_u(t) * np.asarray(u)


def constant_coefficient(name: str, intercept: float = 0.0, slope_x: float = 0.0,
                         slope_u: float = 0.0) -> LinearCoefficient:
    """Coefficient with constant intercept and constant slopes"""
    return LinearCoefficient(
        name=name,
        intercept_kernel=constant_kernel(intercept),
        slope_x=lambda t, v=slope_x: v,
        slope_u=lambda t, v=slope_u: v,
    )


def affine_coefficient(name: str, intercept: float = 0.0, kernel_slope: float = 0.0,
                       slope_x: float = 0.0, slope_u: float = 0.0) -> LinearCoefficient:
    """Coefficient whose measure dependence is intercept + kernel_slope * mean(m)"""
    return LinearCoefficient(
        name=name,
        intercept_kernel=constant_kernel(intercept) if kernel_slope == 0.0 else affine_kernel(intercept, kernel_slope),
        slope_x=lambda t, v=slope_x: v,
        slope_u=lambda t, v=slope_u: v,
    )


@dataclass(frozen=True)
class MajorCostSpec:
    """
    Major running cost f0(t, x0, u0, mbar) and terminal cost g0(x0, mbar)

    `mbar` is the scalar-form summary mean_m[measure_kernel(t, .)].
    `control_curvature` R registers f0 as quadratic in u0
    (f0_u(t, x0, u0, mbar) = R u0 + f0_u(t, x0, 0, mbar)), enabling the closed-form minimiser.
    """
    f0: Callable[..., Any]
    g0: Callable[..., Any]
    f0_x: Callable[..., Any] | None = None
    f0_u: Callable[..., Any] | None = None
    g0_x: Callable[..., Any] | None = None
    measure_kernel: Kernel = identity_kernel
    control_curvature: float | None = None

    def __post_init__(self) -> None:
        if self.f0_x is None:
            object.__setattr__(self, "f0_x", finite_difference(self.f0, 1))
        if self.f0_u is None:
            object.__setattr__(self, "f0_u", finite_difference(self.f0, 2))
        if self.g0_x is None:
            object.__setattr__(self, "g0_x", finite_difference(self.g0, 0))


@dataclass(frozen=True)
class MinorCostSpec:
    """
    Separable minor running cost f = f1(t, x, u, x0) + f2(t, x, mbar, x0) and terminal g(x, mbar, x0)
    """
    f1: Callable[..., Any]
    f2: Callable[..., Any]
    g: Callable[..., Any]
    f1_x: Callable[..., Any] | None = None
    f1_u: Callable[..., Any] | None = None
    f2_x: Callable[..., Any] | None = None
    g_x: Callable[..., Any] | None = None
    measure_kernel: Kernel = identity_kernel
    control_curvature: float | None = None

    def __post_init__(self) -> None:
        if self.f1_x is None:
            object.__setattr__(self, "f1_x", finite_difference(self.f1, 1))
        if self.f1_u is None:
            object.__setattr__(self, "f1_u", finite_difference(self.f1, 2))
        if self.f2_x is None:
            object.__setattr__(self, "f2_x", finite_difference(self.f2, 1))
        if self.g_x is None:
            object.__setattr__(self, "g_x", finite_difference(self.g, 0))

    def f(self, t: float, x: Any, u: Any, mbar: Any, x0: Any) -> np.ndarray:
        return np.asarray(self.f1(t, x, u, x0)) + np.asarray(self.f2(t, x, mbar, x0))

    def f_x(self, t: float, x: Any, u: Any, mbar: Any, x0: Any) -> np.ndarray:
        return np.asarray(self.f1_x(t, x, u, x0)) + np.asarray(self.f2_x(t, x, mbar, x0))


# ============================================================================
# Constants and Initial Laws
# ============================================================================

class ModelConstants(BaseModel):
    """Declared Lipschitz/convexity constants of the standing assumptions"""
    model_config = ConfigDict(frozen=True)

    L: float = Field(gt=0.0)
    L_m: float = Field(default=0.0, ge=0.0)
    l_m: float = Field(default=0.0, ge=0.0)
    l_x0: float = Field(default=0.0, ge=0.0)
    C_f0: float = Field(gt=0.0)
    C_f: float = Field(gt=0.0)

    def violations(self) -> List[str]:
        """Orderings required between the constants, as messages"""
        problems = []
        if self.L < 1.0:
            problems.append(f"L = {self.L} must be >= 1")
        if self.C_f0 < 1.0 / self.L:
            problems.append(f"C_f0 = {self.C_f0} must be >= 1/L = {1.0 / self.L}")
        if self.C_f < 1.0 / self.L:
            problems.append(f"C_f = {self.C_f} must be >= 1/L = {1.0 / self.L}")
        largest = max(self.L_m, self.l_m, self.l_x0)
        if largest > self.L:
            problems.append(f"max(L_m, l_m, l_x0) = {largest} must be <= L = {self.L}")
        return problems


class InitialLaw(BaseModel):
    """Initial distribution descriptor: point mass, uniform or Gaussian with given mean/std"""
    model_config = ConfigDict(frozen=True)

    family: Literal["point", "uniform", "gaussian"] = "point"
    mean: float = 0.0
    std: float = Field(default=0.0, ge=0.0)

    def sample(self, rng: np.random.Generator, size: int | Sequence[int]) -> np.ndarray:
        """Draw exact samples; point masses consume no randomness"""
        if self.family == "point" or self.std == 0.0:
            return np.full(size, self.mean, dtype=float)
        if self.family == "uniform":
            half_width = self.std * np.sqrt(3.0)
            return self.mean + rng.uniform(-half_width, half_width, size)
        return self.mean + self.std * rng.standard_normal(size)

    def is_symmetric(self) -> bool:
        return self.mean == 0.0


# ============================================================================
# Model Spec
# ============================================================================

COEFFICIENT_NAMES = ("b0", "sigma0", "b", "sigma", "sigma_tilde")


@dataclass(frozen=True)
class ModelSpec:
    """Full problem instance; immutable after construction"""
    b0: LinearCoefficient
    sigma0: LinearCoefficient
    b: LinearCoefficient
    sigma: LinearCoefficient
    sigma_tilde: LinearCoefficient
    major_cost: MajorCostSpec
    minor_cost: MinorCostSpec
    constants: ModelConstants
    horizon: float
    init_major: InitialLaw = field(default_factory=InitialLaw)
    init_minor: InitialLaw = field(default_factory=InitialLaw)
    name: str = "custom"
    lq_source: Any = None

    def __post_init__(self) -> None:
        if not self.horizon > 0.0:
            raise AssumptionViolation("Horizon T must be positive", {"horizon": self.horizon})
        problems = self.constants.violations()
        if problems:
            raise AssumptionViolation(
                "Declared constants violate the standing assumptions",
                {"violations": problems, "constants": self.constants.model_dump()}
            )

    @property
    def coefficients(self) -> Dict[str, LinearCoefficient]:
        return {name: getattr(self, name) for name in COEFFICIENT_NAMES}

    @property
    def is_lq(self) -> bool:
        return self.lq_source is not None

    def with_init(self, init_major: InitialLaw | None = None,
                  init_minor: InitialLaw | None = None) -> "ModelSpec":
        """Copy with replaced initial laws (mirrored into the LQ source when present)"""
        init_major = init_major or self.init_major
        init_minor = init_minor or self.init_minor
        lq_source = self.lq_source
        if lq_source is not None:
            lq_source = replace(lq_source, init_major=init_major, init_minor=init_minor)
        return replace(self, init_major=init_major, init_minor=init_minor, lq_source=lq_source)

    def describe(self) -> Dict[str, Any]:
        """Manifest-friendly description"""
        return {
            "name": self.name,
            "horizon": self.horizon,
            "constants": self.constants.model_dump(),
            "init_major": self.init_major.model_dump(),
            "init_minor": self.init_minor.model_dump(),
            "lq": self.is_lq,
        }


def coupling_budget(spec: ModelSpec) -> float:
    """
    max(L_m / C_f, l_x0 * l_m): the quantity the unique-solvability regime bounds by a small delta
    """
    c = spec.constants
    return max(c.L_m / c.C_f, c.l_x0 * c.l_m)


# ============================================================================
# Assumption Validation
# ============================================================================

@dataclass
class AssumptionCheck:
    """Outcome of one spot check"""
    name: str
    passed: bool
    worst_violation: float
    worst_sample: Dict[str, Any]
    n_samples: int


@dataclass
class ValidationReport:
    """All spot checks of one model"""
    checks: List[AssumptionCheck]
    tolerance: float

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def failures(self) -> List[AssumptionCheck]:
        return [check for check in self.checks if not check.passed]

    def check(self, name: str) -> AssumptionCheck:
        for item in self.checks:
            if item.name == name:
                return item
        raise KeyError(name)

    def summary(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "tolerance": self.tolerance,
            "checks": {
                c.name: {"passed": c.passed, "worst_violation": c.worst_violation,
                         "worst_sample": c.worst_sample, "n_samples": c.n_samples}
                for c in self.checks
            },
        }


def _finite(values: Any, label: str, sample: Dict[str, np.ndarray]) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        flat = np.broadcast_to(values, np.broadcast_shapes(values.shape, *(np.shape(v) for v in sample.values())))
        idx = int(np.argmin(np.isfinite(flat.reshape(-1))))
        offending = {
            key: float(np.broadcast_to(v, flat.shape).reshape(-1)[idx]) for key, v in sample.items()
        }
        raise ModelEvaluationError(
            f"Non-finite value from {label}", {"function": label, "tuple": offending}
        )
    return values


def _slack(*terms: Any) -> np.ndarray:
    """Floating-point rounding allowance proportional to the magnitudes involved"""
    total = sum(np.abs(np.asarray(term, dtype=float)) for term in terms)
    return 64.0 * _EPS * (1.0 + total)


def _reduce(name: str, violation: np.ndarray, tol: float, sample: Dict[str, np.ndarray]) -> AssumptionCheck:
    violation = np.asarray(violation, dtype=float).reshape(-1)
    worst = int(np.argmax(violation))
    worst_sample = {
        key: np.broadcast_to(np.asarray(value, dtype=float), violation.shape
                             if np.ndim(value) <= 1 else np.shape(value)).reshape(violation.size, -1)[worst].tolist()
        for key, value in sample.items()
    }
    worst_sample = {k: (v[0] if len(v) == 1 else v) for k, v in worst_sample.items()}
    worst_value = float(violation[worst])
    return AssumptionCheck(
        name=name,
        passed=worst_value <= tol,
        worst_violation=worst_value,
        worst_sample=worst_sample,
        n_samples=int(violation.size),
    )


def validate_assumptions(
    spec: ModelSpec,
    sample_budget: int = 256,
    tol: float = 1e-8,
    seed: int = 0,
    box: float = 5.0,
    times: np.ndarray | None = None,
    ensemble_size: int = 8
) -> ValidationReport:
    """
    Monte Carlo spot checks of the structural assumptions

    Args:
        spec: Model instance
        sample_budget: Samples per check (>= 1)
        tol: Allowed violation (> 0); a rounding allowance is added per sample
        seed: Sampling seed
        box: Sampling box [-box, box] per coordinate
        times: Time points to sample (default: 101 uniform knots on [0, T])
        ensemble_size: Particles per paired ensemble in the monotonicity check

    Returns:
        ValidationReport; passes iff no sampled violation exceeds tol

    Raises:
        ModelEvaluationError: A model function returned a non-finite value
    """
    if sample_budget < 1:
        raise ConfigError("sample_budget must be >= 1", {"sample_budget": sample_budget})
    if not tol > 0:
        raise ConfigError("tol must be positive", {"tol": tol})

    rng = np.random.default_rng(seed)
    if times is None:
        times = np.linspace(0.0, spec.horizon, 101)
    times = np.asarray(times, dtype=float)
    c = spec.constants
    n = sample_budget
    checks: List[AssumptionCheck] = []

    def draw(size: Any = n) -> np.ndarray:
        return rng.uniform(-box, box, size)

    # --- constants ----------------------------------------------------------
    deficits = [
        1.0 - c.L,
        1.0 / c.L - c.C_f0,
        1.0 / c.L - c.C_f,
        max(c.L_m, c.l_m, c.l_x0) - c.L,
    ]
    checks.append(AssumptionCheck(
        name="constants",
        passed=max(deficits) <= 0.0,
        worst_violation=float(max(deficits)),
        worst_sample=c.model_dump(),
        n_samples=1,
    ))

    # --- bounded slopes on the grid ------------------------------------------
    slope_excess = []
    slope_rows = []
    for cname, coef in spec.coefficients.items():
        for t in times:
            sx = float(coef.slope_x(float(t)))
            su = float(coef.slope_u(float(t)))
            if not (np.isfinite(sx) and np.isfinite(su)):
                raise ModelEvaluationError(
                    f"Non-finite slope of {cname}", {"function": cname, "tuple": {"t": float(t)}}
                )
            slope_excess.append(max(abs(sx), abs(su)) - c.L)
            slope_rows.append(float(t))
    checks.append(_reduce("bounded_slopes", np.array(slope_excess), tol, {"t": np.array(slope_rows)}))

    # --- scalar-form kernels are L-Lipschitz ----------------------------------
    kernels = {f"{name}.intercept": coef.intercept_kernel for name, coef in spec.coefficients.items()}
    kernels["major_cost.measure"] = spec.major_cost.measure_kernel
    kernels["minor_cost.measure"] = spec.minor_cost.measure_kernel
    lip_violation = []
    lip_t, lip_y1, lip_y2 = [], [], []
    for kname, kernel in kernels.items():
        t = rng.choice(times, n)
        y1, y2 = draw(), draw()
        k1 = np.array([evaluate_kernel(kernel, float(ti), np.array([a]))[0] for ti, a in zip(t, y1)])
        k2 = np.array([evaluate_kernel(kernel, float(ti), np.array([b]))[0] for ti, b in zip(t, y2)])
        lip_violation.append(np.abs(k1 - k2) - c.L * np.abs(y1 - y2) - _slack(k1, k2))
        lip_t.append(t)
        lip_y1.append(y1)
        lip_y2.append(y2)
    checks.append(_reduce(
        "kernel_lipschitz", np.concatenate(lip_violation), tol,
        {"t": np.concatenate(lip_t), "y1": np.concatenate(lip_y1), "y2": np.concatenate(lip_y2)}
    ))

    # --- major convexity ------------------------------------------------------
    mc = spec.major_cost
    t = rng.choice(times, n)
    x1, x2, u1, u2, mbar = draw(), draw(), draw(), draw(), draw()
    sample = {"t": t, "x0_1": x1, "x0_2": x2, "u0_1": u1, "u0_2": u2, "mbar": mbar}
    f_1 = _finite([mc.f0(ti, a, b, m) for ti, a, b, m in zip(t, x1, u1, mbar)], "f0", sample)
    f_2 = _finite([mc.f0(ti, a, b, m) for ti, a, b, m in zip(t, x2, u2, mbar)], "f0", sample)
    fx = _finite([mc.f0_x(ti, a, b, m) for ti, a, b, m in zip(t, x1, u1, mbar)], "f0_x", sample)
    fu = _finite([mc.f0_u(ti, a, b, m) for ti, a, b, m in zip(t, x1, u1, mbar)], "f0_u", sample)
    gap = f_2 - f_1 - fx * (x2 - x1) - fu * (u2 - u1)
    need = c.C_f0 * (u2 - u1) ** 2
    checks.append(_reduce("major_convexity", need - gap - _slack(f_1, f_2, fx * (x2 - x1), fu * (u2 - u1), need), tol, sample))

    g_1 = _finite([mc.g0(a, m) for a, m in zip(x1, mbar)], "g0", sample)
    g_2 = _finite([mc.g0(a, m) for a, m in zip(x2, mbar)], "g0", sample)
    gx = _finite([mc.g0_x(a, m) for a, m in zip(x1, mbar)], "g0_x", sample)
    gap = g_2 - g_1 - gx * (x2 - x1)
    checks.append(_reduce("major_terminal_convexity", -gap - _slack(g_1, g_2, gx * (x2 - x1)), tol,
                          {"x0_1": x1, "x0_2": x2, "mbar": mbar}))

    # --- minor convexity ------------------------------------------------------
    nc = spec.minor_cost
    t = rng.choice(times, n)
    x1, x2, u1, u2, x0, mbar = draw(), draw(), draw(), draw(), draw(), draw()
    sample = {"t": t, "x_1": x1, "x_2": x2, "u_1": u1, "u_2": u2, "x0": x0}
    f_1 = _finite([nc.f1(ti, a, b, z) for ti, a, b, z in zip(t, x1, u1, x0)], "f1", sample)
    f_2 = _finite([nc.f1(ti, a, b, z) for ti, a, b, z in zip(t, x2, u2, x0)], "f1", sample)
    fx = _finite([nc.f1_x(ti, a, b, z) for ti, a, b, z in zip(t, x1, u1, x0)], "f1_x", sample)
    fu = _finite([nc.f1_u(ti, a, b, z) for ti, a, b, z in zip(t, x1, u1, x0)], "f1_u", sample)
    gap = f_2 - f_1 - fx * (x2 - x1) - fu * (u2 - u1)
    need = c.C_f * (u2 - u1) ** 2
    checks.append(_reduce("minor_convexity", need - gap - _slack(f_1, f_2, fx * (x2 - x1), fu * (u2 - u1), need), tol, sample))

    sample = {"t": t, "x_1": x1, "x_2": x2, "mbar": mbar, "x0": x0}
    h_1 = _finite([nc.f2(ti, a, m, z) for ti, a, m, z in zip(t, x1, mbar, x0)], "f2", sample)
    h_2 = _finite([nc.f2(ti, a, m, z) for ti, a, m, z in zip(t, x2, mbar, x0)], "f2", sample)
    hx = _finite([nc.f2_x(ti, a, m, z) for ti, a, m, z in zip(t, x1, mbar, x0)], "f2_x", sample)
    k_1 = _finite([nc.g(a, m, z) for a, m, z in zip(x1, mbar, x0)], "g", sample)
    k_2 = _finite([nc.g(a, m, z) for a, m, z in zip(x2, mbar, x0)], "g", sample)
    kx = _finite([nc.g_x(a, m, z) for a, m, z in zip(x1, mbar, x0)], "g_x", sample)
    state_violation = np.maximum(
        -(h_2 - h_1 - hx * (x2 - x1)) - _slack(h_1, h_2, hx * (x2 - x1)),
        -(k_2 - k_1 - kx * (x2 - x1)) - _slack(k_1, k_2, kx * (x2 - x1)),
    )
    checks.append(_reduce("minor_state_convexity", state_violation, tol, sample))

    # --- weak monotonicity on paired ensembles --------------------------------
    mono = []
    t = rng.choice(times, n)
    xs, xs_prime, x0 = draw((n, ensemble_size)), draw((n, ensemble_size)), draw()
    for i in range(n):
        ti = float(t[i])
        a, b = xs[i], xs_prime[i]
        m_a = float(kernel_average(nc.measure_kernel, ti, a))
        m_b = float(kernel_average(nc.measure_kernel, ti, b))
        probe = {"t": np.array([ti]), "x0": np.array([x0[i]])}
        da = _finite(nc.f2_x(ti, a, m_a, x0[i]), "f2_x", probe)
        db = _finite(nc.f2_x(ti, b, m_b, x0[i]), "f2_x", probe)
        ga = _finite(nc.g_x(a, m_a, x0[i]), "g_x", probe)
        gb = _finite(nc.g_x(b, m_b, x0[i]), "g_x", probe)
        pair_f = np.mean((db - da) * (b - a))
        pair_g = np.mean((gb - ga) * (b - a))
        allowance = _slack(np.mean(np.abs((db - da) * (b - a))), np.mean(np.abs((gb - ga) * (b - a))))
        mono.append(max(-pair_f, -pair_g) - float(allowance))
    checks.append(_reduce("weak_monotonicity", np.array(mono), tol, {"t": t, "x0": x0}))

    # --- analytic derivatives against central differences ---------------------
    deriv_violation = []
    t = rng.choice(times, n)
    x, u, x0, mbar = draw(), draw(), draw(), draw()
    pairs = [
        (mc.f0_x, finite_difference(mc.f0, 1), lambda fn, i: fn(t[i], x[i], u[i], mbar[i])),
        (mc.f0_u, finite_difference(mc.f0, 2), lambda fn, i: fn(t[i], x[i], u[i], mbar[i])),
        (mc.g0_x, finite_difference(mc.g0, 0), lambda fn, i: fn(x[i], mbar[i])),
        (nc.f1_x, finite_difference(nc.f1, 1), lambda fn, i: fn(t[i], x[i], u[i], x0[i])),
        (nc.f1_u, finite_difference(nc.f1, 2), lambda fn, i: fn(t[i], x[i], u[i], x0[i])),
        (nc.f2_x, finite_difference(nc.f2, 1), lambda fn, i: fn(t[i], x[i], mbar[i], x0[i])),
        (nc.g_x, finite_difference(nc.g, 0), lambda fn, i: fn(x[i], mbar[i], x0[i])),
    ]
    for analytic, numeric, call in pairs:
        if _is_fd(analytic):
            continue
        a_vals = np.array([float(call(analytic, i)) for i in range(n)])
        n_vals = np.array([float(call(numeric, i)) for i in range(n)])
        deriv_violation.append(np.abs(a_vals - n_vals) - 1e-5 * (1.0 + np.abs(a_vals)))
    if deriv_violation:
        checks.append(_reduce("derivatives", np.concatenate(deriv_violation), tol, {}))
    else:
        checks.append(AssumptionCheck("derivatives", True, 0.0, {}, 0))

    report = ValidationReport(checks=checks, tolerance=tol)
    logger.info(
        "Assumption validation finished",
        extra={"extra": {"model": spec.name, "passed": report.passed,
                         "failures": [f.name for f in report.failures()]}}
    )
    return report
