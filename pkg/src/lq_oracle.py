"""
Closed-form reference for linear-quadratic major/minor models
Riccati system, oracle feedback and field, predicted costs and a brute-force one-period check
"""

from dataclasses import dataclass, field
from typing import Dict, Sequence, Tuple

import numpy as np
import pandas as pd

from .errors import (
    AssumptionViolation,
    ConfigError,
    EmptyBundleError,
    RiccatiEscapeError,
    SizeMismatchError,
)
from .fbsde import (
    FeedbackMaps,
    MajorMap,
    MinorMap,
    RegressionBasis,
    SolutionField,
    SolverDiagnostics,
    euler_major,
    euler_minor,
    forward_field,
    snorm_distance,
    snorm_magnitude,
)
from .hamiltonian import summarize
from .logger import get_logger
from .model import (
    InitialLaw,
    MajorCostSpec,
    MinorCostSpec,
    ModelConstants,
    ModelSpec,
    affine_coefficient,
    constant_coefficient,
    identity_kernel,
)
from .stochastics import PathBundle, TimeGrid, sample_bundle
from .worker_pool import get_worker_pool


# ============================================================================
# Logger
# ============================================================================

logger = get_logger("mfg_solver.lq_oracle")

ESCAPE_BOUND = 1e8
RESIDUAL_WARNING = 1e-8
RICCATI_NAMES = ("k", "k0", "phi", "psi", "psi0", "chi", "chi0")


# ============================================================================
# LQ Instances
# ============================================================================

@dataclass(frozen=True)
class LQSpec:
    """
    Scalar linear-quadratic instance

    Major:  dX0 = (a0 X0 + e0 mean(m) + c0 u0) dt + s0 dW0,
            f0 = (Q0 X0^2 + R0 u0^2) / 2 + r0 X0 mean(m),   g0 = G0 X0^2 / 2
    Minor:  dX  = (a X + e mean(m) + c u) dt + s dW + s_tilde dW0,
            f  = (Q X^2 + R u^2) / 2 + rho X X0 + r X mean(m),  g = G X^2 / 2
    """
    a0: float = 0.0
    c0: float = 1.0
    e0: float = 0.0
    s0: float = 0.0
    Q0: float = 0.0
    R0: float = 1.0
    r0: float = 0.0
    G0: float = 0.0
    a: float = 0.0
    c: float = 1.0
    e: float = 0.0
    s: float = 0.0
    s_tilde: float = 0.0
    Q: float = 0.0
    R: float = 1.0
    rho: float = 0.0
    r: float = 0.0
    G: float = 0.0
    horizon: float = 1.0
    init_major: InitialLaw = field(default_factory=InitialLaw)
    init_minor: InitialLaw = field(default_factory=InitialLaw)
    name: str = "lq"

    def __post_init__(self) -> None:
        problems = []
        for label in ("R0", "R", "horizon"):
            if not getattr(self, label) > 0.0:
                problems.append(f"{label} must be positive")
        for label in ("Q0", "Q", "G0", "G", "r"):
            if getattr(self, label) < 0.0:
                problems.append(f"{label} must be non-negative")
        values = [getattr(self, name) for name in self.coefficient_names()]
        if not np.all(np.isfinite(values)):
            problems.append("coefficients must be finite")
        if problems:
            raise AssumptionViolation(
                f"LQ instance {self.name!r} violates the standing assumptions",
                {"violations": problems}
            )

    @staticmethod
    def coefficient_names() -> Tuple[str, ...]:
        return ("a0", "c0", "e0", "s0", "Q0", "R0", "r0", "G0",
                "a", "c", "e", "s", "s_tilde", "Q", "R", "rho", "r", "G", "horizon")

    @property
    def beta0(self) -> float:
        return self.c0 ** 2 / self.R0

    @property
    def beta(self) -> float:
        return self.c ** 2 / self.R

    def describe(self) -> Dict[str, float]:
        return {name: float(getattr(self, name)) for name in self.coefficient_names()}

    def constants(self) -> ModelConstants:
        """Constants implied by the coefficients (tight where the assumptions allow)"""
        magnitudes = [abs(self.a0), abs(self.c0), abs(self.a), abs(self.c), abs(self.e0), abs(self.e),
                      abs(self.r0), abs(self.r), abs(self.rho), self.Q0, self.Q, self.G0, self.G,
                      self.R0, self.R, 2.0 / self.R0, 2.0 / self.R]
        return ModelConstants(
            L=max([1.0] + magnitudes),
            L_m=abs(self.e),
            l_m=max(abs(self.e0), abs(self.r0)),
            l_x0=abs(self.rho),
            C_f0=self.R0 / 2.0,
            C_f=self.R / 2.0,
        )

    def to_model_spec(self) -> ModelSpec:
        """Generic ModelSpec with analytic derivatives and registered control curvature"""
        Q0, R0, r0, G0 = self.Q0, self.R0, self.r0, self.G0
        Q, R, rho, r, G = self.Q, self.R, self.rho, self.r, self.G

        major_cost = MajorCostSpec(
            f0=lambda t, x0, u0, mbar: 0.5 * (Q0 * x0 * x0 + R0 * u0 * u0) + r0 * x0 * mbar,
            g0=lambda x0, mbar: 0.5 * G0 * x0 * x0,
            f0_x=lambda t, x0, u0, mbar: Q0 * x0 + r0 * mbar,
            f0_u=lambda t, x0, u0, mbar: R0 * np.asarray(u0, dtype=float),
            g0_x=lambda x0, mbar: G0 * np.asarray(x0, dtype=float),
            measure_kernel=identity_kernel,
            control_curvature=R0,
        )
        minor_cost = MinorCostSpec(
            f1=lambda t, x, u, x0: 0.5 * R * u * u,
            f2=lambda t, x, mbar, x0: 0.5 * Q * x * x + rho * x * x0 + r * x * mbar,
            g=lambda x, mbar, x0: 0.5 * G * x * x,
            f1_x=lambda t, x, u, x0: np.zeros(np.shape(x)),
            f1_u=lambda t, x, u, x0: R * np.asarray(u, dtype=float),
            f2_x=lambda t, x, mbar, x0: Q * x + rho * x0 + r * mbar,
            g_x=lambda x, mbar, x0: G * np.asarray(x, dtype=float),
            measure_kernel=identity_kernel,
            control_curvature=R,
        )
        return ModelSpec(
            b0=affine_coefficient("b0", kernel_slope=self.e0, slope_x=self.a0, slope_u=self.c0),
            sigma0=constant_coefficient("sigma0", self.s0),
            b=affine_coefficient("b", kernel_slope=self.e, slope_x=self.a, slope_u=self.c),
            sigma=constant_coefficient("sigma", self.s),
            sigma_tilde=constant_coefficient("sigma_tilde", self.s_tilde),
            major_cost=major_cost,
            minor_cost=minor_cost,
            constants=self.constants(),
            horizon=self.horizon,
            init_major=self.init_major,
            init_minor=self.init_minor,
            name=self.name,
            lq_source=self,
        )


def lq_source_of(spec: ModelSpec) -> LQSpec:
    """
    Raises:
        ConfigError: If the model was not built from an LQ instance
    """
    if not isinstance(spec.lq_source, LQSpec):
        raise ConfigError(f"Model {spec.name!r} is not linear-quadratic", {"model": spec.name})
    return spec.lq_source


# ============================================================================
# Riccati System
# ============================================================================

def _riccati_rhs(lq: LQSpec, y: np.ndarray) -> np.ndarray:
    """Time derivative of (k, k0, phi, psi, psi0, chi, chi0); y may carry trailing axes"""
    k, k0, phi, psi, psi0, chi, chi0 = y
    beta, beta0 = lq.beta, lq.beta0
    mean_rate = lq.a + lq.e - beta * (k + psi)
    return np.array([
        -2.0 * lq.a * k + beta * k * k - lq.Q,
        -2.0 * lq.a0 * k0 + beta0 * k0 * k0 - lq.Q0 + beta * psi0 * phi,
        -lq.a * phi - lq.rho + k * beta * phi - phi * (lq.a0 - beta0 * k0) + psi * beta * phi,
        -lq.a * psi - lq.r - k * (lq.e - beta * psi) - phi * (lq.e0 - beta0 * psi0) - psi * mean_rate,
        -lq.a0 * psi0 - lq.r0 - k0 * (lq.e0 - beta0 * psi0) - psi0 * mean_rate,
        -lq.a * chi + k * beta * chi + phi * beta0 * chi0 + psi * beta * chi,
        -lq.a0 * chi0 + k0 * beta0 * chi0 + psi0 * beta * chi,
    ])


def _mean_matrix(lq: LQSpec, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Closed-loop drift (A, B) of (X, X0, mean) under the oracle feedback"""
    k, k0, phi, psi, psi0, chi, chi0 = y
    beta, beta0 = lq.beta, lq.beta0
    A = np.array([
        [lq.a - beta * k, -beta * phi, lq.e - beta * psi],
        [0.0, lq.a0 - beta0 * k0, lq.e0 - beta0 * psi0],
        [0.0, -beta * phi, lq.a + lq.e - beta * (k + psi)],
    ])
    B = np.array([-beta * chi, -beta0 * chi0, -beta * chi])
    return A, B


def _rk4(rhs, y: np.ndarray, h: float) -> np.ndarray:
    k1 = rhs(y)
    k2 = rhs(y + 0.5 * h * k1)
    k3 = rhs(y + 0.5 * h * k2)
    k4 = rhs(y + h * k3)
    return y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@dataclass
class RiccatiSolution:
    """
    Riccati coefficients on a fine grid (2 * refinement nodes per step) and mean flows on the knots

    The adjoint ansatz reads p = k X + phi X0 + psi mean + chi and p0 = k0 X0 + psi0 mean + chi0.
    """
    lq: LQSpec
    grid: TimeGrid
    fine: TimeGrid
    values: np.ndarray
    mean_major: np.ndarray
    mean_minor: np.ndarray
    residual: float

    @property
    def residual_ok(self) -> bool:
        """Finite-difference self-check within RESIDUAL_WARNING"""
        return self.residual <= RESIDUAL_WARNING

    @property
    def stride(self) -> int:
        return self.fine.n_steps // self.grid.n_steps

    @property
    def knot_values(self) -> np.ndarray:
        """(n+1, 7) coefficients at the coarse knots"""
        return self.values[::self.stride]

    def coefficient(self, name: str) -> np.ndarray:
        return self.knot_values[:, RICCATI_NAMES.index(name)]

    def integrands(self) -> Dict[str, np.ndarray]:
        """Deterministic martingale integrands (q0, q, q_tilde) at the knots"""
        lq = self.lq
        k, k0, phi, psi, psi0 = (self.coefficient(name) for name in ("k", "k0", "phi", "psi", "psi0"))
        return {
            "q0": k0 * lq.s0 + psi0 * lq.s_tilde,
            "q": k * lq.s,
            "q_tilde": k * lq.s_tilde + phi * lq.s0 + psi * lq.s_tilde,
        }


def solve_riccati(lq: LQSpec, grid: TimeGrid, refinement: int = 10) -> RiccatiSolution:
    """
    Integrate the coupled Riccati system backward by RK4 on the grid refined 2 * refinement times

    Args:
        lq: LQ instance
        grid: Coarse time grid (horizon must equal lq.horizon)
        refinement: Forward RK4 steps per coarse step

    Returns:
        RiccatiSolution with a finite-difference self-check residual

    Raises:
        RiccatiEscapeError: If a coefficient leaves [-1e8, 1e8] or becomes non-finite
        SizeMismatchError: If the grid horizon differs from the instance horizon
    """
    if abs(grid.horizon - lq.horizon) > 1e-12 * max(1.0, lq.horizon):
        raise SizeMismatchError(
            "Grid horizon differs from the LQ horizon", {"grid": grid.horizon, "lq": lq.horizon}
        )
    fine = grid.refine(2 * refinement)
    h = fine.dt
    n_fine = fine.n_steps
    values = np.empty((n_fine + 1, len(RICCATI_NAMES)))
    values[n_fine] = [lq.G, lq.G0, 0.0, 0.0, 0.0, 0.0, 0.0]

    def rhs(y: np.ndarray) -> np.ndarray:
        return _riccati_rhs(lq, y)

    for j in reversed(range(n_fine)):
        values[j] = _rk4(rhs, values[j + 1], -h)
        if not np.all(np.isfinite(values[j])) or np.max(np.abs(values[j])) > ESCAPE_BOUND:
            raise RiccatiEscapeError(
                f"Riccati solution escapes at t = {fine.time(j):.6g}",
                {"t": fine.time(j), "model": lq.name}
            )

    residual = 0.0
    if n_fine >= 5:
        stencil = (-values[4:] + 8.0 * values[3:-1] - 8.0 * values[1:-3] + values[:-4]) / (12.0 * h)
        exact = _riccati_rhs(lq, values[2:-2].T).T
        residual = float(np.max(np.abs(stencil - exact)) / (1.0 + np.max(np.abs(exact))))
    if residual > RESIDUAL_WARNING:
        logger.warning(
            "Riccati self-check residual is large",
            extra={"extra": {"model": lq.name, "residual": residual}}
        )

    mu = np.array([lq.init_major.mean, lq.init_minor.mean])
    means = np.empty((grid.n_steps + 1, 2))
    means[0] = mu
    stride = 2 * refinement
    for j in range(0, n_fine, 2):
        mu = _rk4_nodes(lq, mu, (values[j], values[j + 1], values[j + 2]), 2.0 * h)
        if (j + 2) % stride == 0:
            means[(j + 2) // stride] = mu

    solution = RiccatiSolution(
        lq=lq, grid=grid, fine=fine, values=values,
        mean_major=means[:, 0], mean_minor=means[:, 1], residual=residual,
    )
    logger.info(
        "Riccati system solved",
        extra={"extra": {"model": lq.name, "k_0": float(values[0, 0]), "k0_0": float(values[0, 1]),
                         "residual": residual}}
    )
    return solution


def _rk4_nodes(lq: LQSpec, mu: np.ndarray, nodes: Sequence[np.ndarray], h: float) -> np.ndarray:
    """One forward RK4 step of the (X0, mean) means with coefficients at start, midpoint and end"""
    def rhs(m: np.ndarray, y: np.ndarray) -> np.ndarray:
        A, B = _mean_matrix(lq, y)
        full = np.array([m[1], m[0], m[1]])
        drift = A @ full + B
        return np.array([drift[1], drift[2]])

    k1 = rhs(mu, nodes[0])
    k2 = rhs(mu + 0.5 * h * k1, nodes[1])
    k3 = rhs(mu + 0.5 * h * k2, nodes[1])
    k4 = rhs(mu + h * k3, nodes[2])
    return mu + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# ============================================================================
# Oracle Feedback and Field
# ============================================================================

@dataclass(frozen=True)
class OracleFeedback:
    p0: np.ndarray
    u0: np.ndarray
    p: np.ndarray
    u: np.ndarray
    interpolated: bool


def oracle_feedback(rs: RiccatiSolution, t: float, x: np.ndarray, x0: np.ndarray,
                    mean_m: np.ndarray) -> OracleFeedback:
    """
    Optimal adjoints and controls from the Riccati coefficients

    Off-knot times are linearly interpolated between neighbouring knots and flagged.
    """
    k_idx, w = rs.grid.index_of(t)
    y = rs.knot_values[k_idx]
    if w > 0.0:
        y = (1.0 - w) * y + w * rs.knot_values[k_idx + 1]
    k, k0, phi, psi, psi0, chi, chi0 = y
    x, x0, mean_m = (np.asarray(v, dtype=float) for v in (x, x0, mean_m))
    p = k * x + phi * x0 + psi * mean_m + chi
    p0 = k0 * x0 + psi0 * mean_m + chi0
    lq = rs.lq
    return OracleFeedback(p0=p0, u0=-lq.c0 * p0 / lq.R0, p=p, u=-lq.c * p / lq.R, interpolated=w > 0.0)


def _affine_coefficients(powers: np.ndarray, intercept: float, slopes: Sequence[float]) -> np.ndarray:
    coef = np.zeros(len(powers))
    for j, row in enumerate(powers):
        order = int(row.sum())
        if order == 0:
            coef[j] = intercept
        elif order == 1:
            coef[j] = slopes[int(np.argmax(row))]
    return coef


def oracle_maps(rs: RiccatiSolution, basis: RegressionBasis | None = None) -> FeedbackMaps:
    """The ansatz written as regression coefficients, so solver and oracle share one evaluation path"""
    basis = basis if basis is not None else RegressionBasis(1)
    n = rs.grid.n_steps
    major = MajorMap.zeros(n, basis.n_major)
    minor = MinorMap.zeros(n, basis.n_minor)
    q = rs.integrands()
    for step in range(n):
        k, k0, phi, psi, psi0, chi, chi0 = rs.knot_values[step]
        major.p[step] = _affine_coefficients(basis.major_powers, chi0, (k0, psi0))
        major.q[step] = _affine_coefficients(basis.major_powers, q["q0"][step], (0.0, 0.0))
        minor.p[step] = _affine_coefficients(basis.minor_powers, chi, (k, phi, psi))
        minor.q[step] = _affine_coefficients(basis.minor_powers, q["q"][step], (0.0, 0.0, 0.0))
        minor.q_tilde[step] = _affine_coefficients(basis.minor_powers, q["q_tilde"][step], (0.0, 0.0, 0.0))
    return FeedbackMaps(basis, major, minor)


def oracle_field(rs: RiccatiSolution, bundle: PathBundle, spec: ModelSpec | None = None) -> SolutionField:
    """
    Oracle solution on a bundle: particles driven by the closed-form feedback with the
    empirical ensemble mean standing in for the conditional mean

    Raises:
        SizeMismatchError: If the bundle grid differs from the Riccati grid
    """
    if bundle.grid != rs.grid:
        raise SizeMismatchError(
            "Bundle grid differs from the Riccati grid", {"bundle": vars(bundle.grid), "riccati": vars(rs.grid)}
        )
    spec = spec if spec is not None else rs.lq.to_model_spec()
    return forward_field(spec, oracle_maps(rs), bundle, SolverDiagnostics(method="oracle"))


# ============================================================================
# Comparison
# ============================================================================

@dataclass
class OracleComparison:
    """Relative S-norm error of a solver field against the oracle field plus per-quantity errors"""
    relative_error: float
    distance: float
    oracle_magnitude: float
    per_quantity: Dict[str, Dict[str, float]]

    def passed(self, tolerance: float) -> bool:
        return self.relative_error <= tolerance

    def to_dict(self) -> Dict[str, object]:
        return {
            "relative_error": self.relative_error,
            "distance": self.distance,
            "oracle_magnitude": self.oracle_magnitude,
            "per_quantity": self.per_quantity,
        }


def compare_fields(solver: SolutionField, oracle: SolutionField) -> OracleComparison:
    """
    Raises:
        SizeMismatchError: If the fields live on different grids or shapes
    """
    distance = snorm_distance(solver, oracle)
    magnitude = snorm_magnitude(oracle)
    per_quantity = {}
    for name, reference in oracle.quantities().items():
        diff = np.abs(getattr(solver, name) - reference)
        scale = float(np.max(np.abs(reference)))
        mean_scale = float(np.mean(np.abs(reference)))
        per_quantity[name] = {
            "max_abs": float(np.max(diff)),
            "max_rel": float(np.max(diff)) / scale if scale > 0.0 else float(np.max(diff)),
            "mean_rel": float(np.mean(diff)) / mean_scale if mean_scale > 0.0 else float(np.mean(diff)),
        }
    relative = 0.0 if distance == 0.0 else distance / max(magnitude, 1e-300)
    logger.info(
        "Oracle comparison",
        extra={"extra": {"relative_error": relative, "distance": distance, "oracle_magnitude": magnitude}}
    )
    return OracleComparison(relative, distance, magnitude, per_quantity)


# ============================================================================
# Predicted Costs
# ============================================================================

def predicted_costs(rs: RiccatiSolution) -> Tuple[float, float]:
    """
    Expected costs (major, representative minor) at t = 0 under the oracle feedback

    First and second moments of Z = (X, X0, mean) follow linear ODEs
        dmu/dt = A mu + B,   dS/dt = A S + S A' + B mu' + mu B' + D D'
    integrated by RK4 on the fine grid; the costs are quadratic forms of (mu, S).
    """
    lq = rs.lq
    D = np.array([[lq.s, lq.s_tilde], [0.0, lq.s0], [0.0, lq.s_tilde]])
    DD = D @ D.T
    c_m, c_0 = lq.c / lq.R, lq.c0 / lq.R0

    def running(y: np.ndarray, mu: np.ndarray, S: np.ndarray) -> Tuple[float, float]:
        k, k0, phi, psi, psi0, chi, chi0 = y
        w = np.array([k, phi, psi])
        w0 = np.array([0.0, k0, psi0])
        p_sq = w @ S @ w + 2.0 * chi * (w @ mu) + chi * chi
        p0_sq = w0 @ S @ w0 + 2.0 * chi0 * (w0 @ mu) + chi0 * chi0
        minor = 0.5 * lq.Q * S[0, 0] + 0.5 * lq.R * c_m * c_m * p_sq + lq.rho * S[0, 1] + lq.r * S[0, 2]
        major = 0.5 * lq.Q0 * S[1, 1] + 0.5 * lq.R0 * c_0 * c_0 * p0_sq + lq.r0 * S[1, 2]
        return major, minor

    def rhs(state: Tuple[np.ndarray, np.ndarray], y: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        mu, S = state
        A, B = _mean_matrix(lq, y)
        d_mu = A @ mu + B
        d_S = A @ S + S @ A.T + np.outer(B, mu) + np.outer(mu, B) + DD
        return d_mu, d_S, np.array(running(y, mu, S))

    m, m0 = lq.init_minor.mean, lq.init_major.mean
    v = lq.init_minor.std ** 2 if lq.init_minor.family != "point" else 0.0
    v0 = lq.init_major.std ** 2 if lq.init_major.family != "point" else 0.0
    mu = np.array([m, m0, m])
    S = np.outer(mu, mu) + np.diag([v, v0, 0.0])
    costs = np.zeros(2)

    h = 2.0 * rs.fine.dt
    values = rs.values
    for j in range(0, rs.fine.n_steps, 2):
        y0, y1, y2 = values[j], values[j + 1], values[j + 2]
        a1 = rhs((mu, S), y0)
        a2 = rhs((mu + 0.5 * h * a1[0], S + 0.5 * h * a1[1]), y1)
        a3 = rhs((mu + 0.5 * h * a2[0], S + 0.5 * h * a2[1]), y1)
        a4 = rhs((mu + h * a3[0], S + h * a3[1]), y2)
        costs = costs + h / 6.0 * (a1[2] + 2.0 * a2[2] + 2.0 * a3[2] + a4[2])
        mu = mu + h / 6.0 * (a1[0] + 2.0 * a2[0] + 2.0 * a3[0] + a4[0])
        S = S + h / 6.0 * (a1[1] + 2.0 * a2[1] + 2.0 * a3[1] + a4[1])

    major = float(costs[0] + 0.5 * lq.G0 * S[1, 1])
    minor = float(costs[1] + 0.5 * lq.G * S[0, 0])
    return major, minor


# ============================================================================
# Discrete Best-Response Gains
# ============================================================================

def discrete_feedback_gains(lq: LQSpec, grid: TimeGrid) -> Tuple[np.ndarray, np.ndarray]:
    """
    State-feedback gains of the Euler-discretised single-agent problems

    With the environment frozen, the optimal deviation from a reference control is
    u_k = u_ref_k - L_k (x_k - x_ref_k) where L_k solves the discrete Riccati recursion
    of x' = (1 + a dt) x + c dt u with stage cost dt (Q x^2 + R u^2) / 2.

    Returns:
        (major gains, minor gains), each of shape (n,)
    """
    def gains(a: float, c: float, Q: float, R: float, G: float) -> np.ndarray:
        dt = grid.dt
        A, B = 1.0 + a * dt, c * dt
        out = np.empty(grid.n_steps)
        P = G
        for k in reversed(range(grid.n_steps)):
            denom = R * dt + B * B * P
            out[k] = A * B * P / denom
            P = Q * dt + A * A * P - (A * B * P) ** 2 / denom
        return out

    return gains(lq.a0, lq.c0, lq.Q0, lq.R0, lq.G0), gains(lq.a, lq.c, lq.Q, lq.R, lq.G)


# ============================================================================
# Brute-Force One-Period Check
# ============================================================================

@dataclass
class BruteForceResult:
    """Monte Carlo cost per candidate control and the selected minimiser"""
    table: pd.DataFrame
    best_control: float
    best_cost: float


def brute_force_single_period(spec: ModelSpec, control_grid: Sequence[float], n_mc: int,
                              seed: int = 0) -> BruteForceResult:
    """
    Representative minor's cost on a one-step grid for each constant control in a grid

    The measure stays frozen at a sample of the initial minor law, the major applies zero
    control, and every candidate reuses the same noise. Near-ties (within 1e-12 relative)
    go to the smallest |u|, then the smaller u.

    Raises:
        ConfigError: If the control grid is empty
        EmptyBundleError: If n_mc < 1
    """
    controls = np.asarray(control_grid, dtype=float).reshape(-1)
    if controls.size == 0:
        raise ConfigError("Brute-force check needs a non-empty control grid")
    if n_mc < 1:
        raise EmptyBundleError("Brute-force check needs at least one sample", {"n_mc": n_mc})

    grid = TimeGrid(spec.horizon, 1)
    bundle = sample_bundle(grid, n_mc, 1, spec.init_major, spec.init_minor, seed)
    T = spec.horizon
    xi0, dW0 = bundle.xi0, bundle.dW0[:, 0]
    xi, dW = bundle.xi[:, 0], bundle.dW[:, 0, 0]
    start = summarize(spec, 0.0, xi)
    end = summarize(spec, T, xi)
    X0_T = euler_major(spec, 0.0, T, xi0, np.zeros_like(xi0), start, dW0)
    cost = spec.minor_cost

    def evaluate(u: float) -> Tuple[float, float]:
        X_T = euler_minor(spec, 0.0, T, xi, u, start, dW, dW0)
        running = np.broadcast_to(cost.f(0.0, xi, u, start.minor_bar, xi0), xi.shape)
        terminal = np.broadcast_to(cost.g(X_T, end.minor_bar, X0_T), xi.shape)
        samples = T * running + terminal
        stderr = float(np.std(samples, ddof=1) / np.sqrt(n_mc)) if n_mc > 1 else 0.0
        return float(np.mean(samples)), stderr

    results = get_worker_pool().map("brute_force", evaluate, controls.tolist())
    costs = np.array([r[0] for r in results])
    table = pd.DataFrame({"control": controls, "cost": costs, "stderr": [r[1] for r in results]})

    best = float(np.min(costs))
    tied = np.flatnonzero(costs <= best + 1e-12 * (1.0 + abs(best)))
    order = np.lexsort((controls[tied], np.abs(controls[tied])))
    chosen = int(tied[order[0]])
    logger.info(
        "Brute-force one-period check",
        extra={"extra": {"model": spec.name, "best_control": float(controls[chosen]), "best_cost": float(costs[chosen])}}
    )
    return BruteForceResult(table=table, best_control=float(controls[chosen]), best_cost=float(costs[chosen]))
