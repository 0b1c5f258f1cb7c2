"""
Finite-population harness for the limit controls
Limit-agent paths, the (N+1)-agent game under common random numbers, propagation-of-chaos and epsilon-Nash estimates
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np
from scipy.stats import linregress, t as student_t

from .config import NashConfig
from .errors import (
    BundleMismatchError,
    ConfigError,
    EmptyFamilyError,
    MFGError,
    ScalingAbortedError,
    UnpairedError,
)
from .fbsde import SolutionField, euler_major, euler_minor, forward_field
from .hamiltonian import minimize_major, minimize_minor, summarize
from .logger import get_logger
from .lq_oracle import discrete_feedback_gains, lq_source_of
from .model import ModelSpec
from .stochastics import STREAM_KIND_LIMIT_AGENT, PathBundle, TimeGrid, sample_bundle
from .worker_pool import get_worker_pool


# ============================================================================
# Logger
# ============================================================================

logger = get_logger("mfg_solver.nash")

CI_LEVEL = 0.95


# ============================================================================
# Path Containers
# ============================================================================

@dataclass
class LimitAgents:
    """
    Limit-system paths of agents 0..N: states follow the solved feedback maps under the
    field's measure flow, driven by per-agent noises sharing one common noise
    """
    N: int
    grid: TimeGrid
    seed: int
    X0: np.ndarray
    u0: np.ndarray
    X: np.ndarray
    u: np.ndarray
    agent_kind: int = STREAM_KIND_LIMIT_AGENT

    @property
    def n_scenarios(self) -> int:
        return int(self.X0.shape[0])


@dataclass
class FiniteGameState:
    """
    (N+1)-agent game paths with empirical-measure interactions

    major_bar / minor_bar hold the cost-kernel averages over the N minor agents per knot.
    """
    N: int
    grid: TimeGrid
    seed: int
    X0: np.ndarray
    u0: np.ndarray
    X: np.ndarray
    u: np.ndarray
    major_bar: np.ndarray
    minor_bar: np.ndarray
    deviator: Tuple[int, str] | None = None

    @property
    def n_scenarios(self) -> int:
        return int(self.X0.shape[0])


def _check_population(bundle: PathBundle, N: int) -> None:
    if N < 1:
        raise ConfigError("The finite game needs at least one minor agent", {"N": N})
    if bundle.n_particles < N:
        raise BundleMismatchError(
            "Bundle has fewer idiosyncratic paths than agents",
            {"n_particles": bundle.n_particles, "N": N}
        )


def _check_limit_bundle(bundle: PathBundle, field_: SolutionField, N: int) -> None:
    """Agents must ride on the common noise the field was solved with"""
    _check_population(bundle, N)
    noise = field_.noise
    if noise is None:
        shared = bundle.seed == field_.seed and bundle.grid == field_.grid
    else:
        shared = bundle.common_noise_of(noise)
    if not shared:
        raise BundleMismatchError(
            "Bundle does not share the common noise of the solved field",
            {"bundle_seed": bundle.seed, "field_seed": field_.seed}
        )


def simulate_limit_agents(field_: SolutionField, spec: ModelSpec, N: int, bundle: PathBundle) -> LimitAgents:
    """
    Evaluate the field's feedback maps along fresh per-agent noises

    Agent 0 is the major; agent i >= 1 uses idiosyncratic path i - 1 of the bundle. Fresh
    agents come from the STREAM_KIND_LIMIT_AGENT stream; a bundle from the field's own
    stream makes agent i replay particle i - 1 of the measure.
    Every agent reads the measure flow of the field's scenario, never the other agents.

    Raises:
        ConfigError: If N < 1
        BundleMismatchError: If the common noise, scenario or particle counts are incompatible
    """
    _check_limit_bundle(bundle, field_, N)
    K = bundle.n_scenarios
    if K > field_.n_scenarios:
        raise BundleMismatchError(
            "Bundle has more scenarios than the field",
            {"bundle": K, "field": field_.n_scenarios}
        )

    grid, maps = field_.grid, field_.maps
    n, dt = grid.n_steps, grid.dt
    X0, u0 = np.empty((K, n + 1)), np.empty((K, n))
    X, u = np.empty((K, N, n + 1)), np.empty((K, N, n))
    X0[:, 0] = bundle.xi0
    X[:, :, 0] = bundle.xi[:, :N]

    for k in range(n):
        t = grid.time(k)
        s = summarize(spec, t, field_.X[:K, :, k])
        adj0 = maps.major_adjoint(k, X0[:, k], s.mean)
        u0[:, k] = minimize_major(t, X0[:, k], adj0, s, spec)
        x0 = X0[:, k, None]
        adj = maps.minor_adjoint(k, X[:, :, k], x0, s.mean[:, None])
        u[:, :, k] = minimize_minor(t, X[:, :, k], adj, x0, spec)
        X0[:, k + 1] = euler_major(spec, t, dt, X0[:, k], u0[:, k], s, bundle.dW0[:, k])
        X[:, :, k + 1] = euler_minor(
            spec, t, dt, X[:, :, k], u[:, :, k], s.per_particle(), bundle.dW[:, :N, k], bundle.dW0[:, k, None]
        )

    return LimitAgents(N=N, grid=grid, seed=bundle.seed, X0=X0, u0=u0, X=X, u=u, agent_kind=bundle.agent_kind)


# ============================================================================
# Deviations
# ============================================================================

DeviationRule = Callable[[int, np.ndarray, np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Deviation:
    """
    Alternative control for one agent

    `rule(step, x, x_ref, u_ref)` maps the agent's current finite-game state, its limit
    state and its limit control to the applied control. Open-loop rules ignore the states.
    """
    name: str
    rule: DeviationRule
    closed_loop: bool = False

    def control(self, step: int, x: np.ndarray, x_ref: np.ndarray, u_ref: np.ndarray) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.rule(step, x, x_ref, u_ref), dtype=float), np.shape(u_ref)).copy()


def reference_deviation() -> Deviation:
    return Deviation("reference", lambda k, x, x_ref, u_ref: u_ref)


def scaled_deviation(factor: float) -> Deviation:
    return Deviation(f"scale_{factor:g}", lambda k, x, x_ref, u_ref: factor * u_ref)


def shifted_deviation(offset: float) -> Deviation:
    return Deviation(f"shift_{offset:+g}", lambda k, x, x_ref, u_ref: u_ref + offset)


def zero_deviation() -> Deviation:
    return Deviation("zero", lambda k, x, x_ref, u_ref: np.zeros_like(u_ref))


def feedback_deviation(name: str, gains: np.ndarray) -> Deviation:
    """Closed-loop correction u = u_ref - gains[k] (x - x_ref)"""
    gains = np.asarray(gains, dtype=float)
    return Deviation(name, lambda k, x, x_ref, u_ref: u_ref - gains[k] * (x - x_ref), closed_loop=True)


def default_deviation_family(cfg: NashConfig | None = None) -> List[Deviation]:
    """Scaled, shifted and zero controls around the limit control"""
    cfg = cfg if cfg is not None else NashConfig()
    family = [scaled_deviation(c) for c in cfg.scales]
    family += [shifted_deviation(c) for c in cfg.offsets]
    family.append(zero_deviation())
    return family


def lq_best_response_deviation(spec: ModelSpec, grid: TimeGrid, agent: int) -> Deviation:
    """
    Frozen-field best response of an LQ agent: the limit control corrected by the
    discrete Riccati gain times the agent's drift away from its limit path

    Raises:
        ConfigError: If the model is not linear-quadratic
    """
    major_gains, minor_gains = discrete_feedback_gains(lq_source_of(spec), grid)
    return feedback_deviation("best_response", major_gains if agent == 0 else minor_gains)


def deviation_family_for(spec: ModelSpec, grid: TimeGrid, agent: int, cfg: NashConfig | None = None) -> List[Deviation]:
    family = default_deviation_family(cfg)
    if spec.is_lq:
        family.append(lq_best_response_deviation(spec, grid, agent))
    return family


# ============================================================================
# Finite Game
# ============================================================================

def simulate_finite_game(
    spec: ModelSpec,
    controls: LimitAgents,
    bundle: PathBundle,
    N: int,
    deviator: Tuple[int, Deviation] | None = None
) -> FiniteGameState:
    """
    Euler integration of the (N+1)-agent system under the limit controls

    Intercepts are averaged over the N minor agents' empirical measure; noises are the
    bundle's, which must be the one the limit agents were simulated with.

    Args:
        spec: Model instance
        controls: Limit-agent control paths (their states anchor closed-loop deviations)
        bundle: Common random numbers
        N: Minor-agent count
        deviator: Optional (agent index, deviation); agent 0 is the major

    Raises:
        ConfigError: If N < 1 or the deviator index is out of range
        BundleMismatchError: If the bundle or controls do not match N, seed or grid
    """
    _check_population(bundle, N)
    if (bundle.seed != controls.seed or bundle.grid != controls.grid
            or bundle.agent_kind != controls.agent_kind):
        raise BundleMismatchError(
            "Bundle is not the one the limit agents were simulated with",
            {"bundle_seed": bundle.seed, "controls_seed": controls.seed}
        )
    if controls.N != N or controls.n_scenarios != bundle.n_scenarios:
        raise BundleMismatchError(
            "Limit controls were simulated for another population or bundle",
            {"controls_N": controls.N, "N": N, "controls_K": controls.n_scenarios, "K": bundle.n_scenarios}
        )
    if deviator is not None and not 0 <= deviator[0] <= N:
        raise ConfigError(f"Deviating agent {deviator[0]} is not in 0..{N}", {"agent": deviator[0], "N": N})

    grid = controls.grid
    K, n, dt = bundle.n_scenarios, grid.n_steps, grid.dt
    X0, u0 = np.empty((K, n + 1)), np.empty((K, n))
    X, u = np.empty((K, N, n + 1)), np.empty((K, N, n))
    major_bar, minor_bar = np.empty((K, n + 1)), np.empty((K, n + 1))
    X0[:, 0] = bundle.xi0
    X[:, :, 0] = bundle.xi[:, :N]
    agent = deviator[0] if deviator is not None else None

    for k in range(n):
        t = grid.time(k)
        s = summarize(spec, t, X[:, :, k])
        major_bar[:, k], minor_bar[:, k] = s.major_bar, s.minor_bar

        u0[:, k] = controls.u0[:, k]
        u[:, :, k] = controls.u[:, :, k]
        if agent == 0:
            u0[:, k] = deviator[1].control(k, X0[:, k], controls.X0[:, k], controls.u0[:, k])
        elif agent is not None:
            j = agent - 1
            u[:, j, k] = deviator[1].control(k, X[:, j, k], controls.X[:, j, k], controls.u[:, j, k])

        X0[:, k + 1] = euler_major(spec, t, dt, X0[:, k], u0[:, k], s, bundle.dW0[:, k])
        X[:, :, k + 1] = euler_minor(
            spec, t, dt, X[:, :, k], u[:, :, k], s.per_particle(), bundle.dW[:, :N, k], bundle.dW0[:, k, None]
        )

    s_n = summarize(spec, grid.horizon, X[:, :, n])
    major_bar[:, n], minor_bar[:, n] = s_n.major_bar, s_n.minor_bar
    return FiniteGameState(
        N=N, grid=grid, seed=bundle.seed, X0=X0, u0=u0, X=X, u=u,
        major_bar=major_bar, minor_bar=minor_bar,
        deviator=(agent, deviator[1].name) if deviator is not None else None,
    )


# ============================================================================
# Estimators
# ============================================================================

@dataclass(frozen=True)
class ChaosEstimate:
    value: float
    stderr: float
    agent: int
    step: int


def _stderr(samples: np.ndarray) -> float:
    if samples.size < 2:
        return 0.0
    return float(np.std(samples, ddof=1) / np.sqrt(samples.size))


def chaos_gap(limit: LimitAgents, game: FiniteGameState) -> ChaosEstimate:
    """
    sup over agents and knots of the scenario-mean squared gap between finite-game and limit states

    Raises:
        UnpairedError: If the game was not simulated from these limit agents without deviation
    """
    if (game.seed != limit.seed or game.grid != limit.grid or game.N != limit.N
            or game.n_scenarios != limit.n_scenarios or game.deviator is not None):
        raise UnpairedError(
            "Chaos gap needs the undeviated game simulated with the same noises as the limit agents",
            {"game": [game.seed, game.N, game.n_scenarios], "limit": [limit.seed, limit.N, limit.n_scenarios]}
        )
    squared = np.concatenate([(game.X0 - limit.X0)[:, None, :] ** 2, (game.X - limit.X) ** 2], axis=1)
    per_agent = squared.mean(axis=0)
    agent, step = np.unravel_index(int(np.argmax(per_agent)), per_agent.shape)
    return ChaosEstimate(
        value=float(per_agent[agent, step]),
        stderr=_stderr(squared[:, agent, step]),
        agent=int(agent),
        step=int(step),
    )


def cost_samples(spec: ModelSpec, i: int, game: FiniteGameState) -> np.ndarray:
    """
    Per-scenario discrete cost of agent i: left-point running sum plus terminal cost,
    with measure arguments from the N-agent empirical measure

    Raises:
        ConfigError: If i is not in 0..N
    """
    if not 0 <= i <= game.N:
        raise ConfigError(f"Agent {i} is not in 0..{game.N}", {"agent": i, "N": game.N})
    grid = game.grid
    n, dt = grid.n_steps, grid.dt
    total = np.zeros(game.n_scenarios)

    if i == 0:
        cost = spec.major_cost
        for k in range(n):
            total += dt * np.asarray(cost.f0(grid.time(k), game.X0[:, k], game.u0[:, k], game.major_bar[:, k]))
        return total + np.asarray(cost.g0(game.X0[:, n], game.major_bar[:, n]))

    j = i - 1
    cost = spec.minor_cost
    for k in range(n):
        total += dt * np.asarray(
            cost.f(grid.time(k), game.X[:, j, k], game.u[:, j, k], game.minor_bar[:, k], game.X0[:, k])
        )
    return total + np.asarray(cost.g(game.X[:, j, n], game.minor_bar[:, n], game.X0[:, n]))


def estimate_cost(spec: ModelSpec, i: int, game: FiniteGameState,
                  n_replications: int | None = None) -> Tuple[float, float]:
    """
    Monte Carlo cost of agent i over the first n_replications scenarios (all by default)

    Returns:
        (mean cost, standard error)
    """
    samples = cost_samples(spec, i, game)
    if n_replications is not None:
        samples = samples[:n_replications]
    return float(np.mean(samples)), _stderr(samples)


@dataclass
class DeviationGap:
    """
    Estimated epsilon of one agent: the best improvement found in a finite deviation family

    A finite family gives a lower bound on the true gap.
    """
    agent: int
    N: int
    epsilon: float
    stderr: float
    reference_cost: float
    reference_stderr: float
    best: str
    costs: Dict[str, float] = field(default_factory=dict)


def deviation_gap(
    spec: ModelSpec,
    field_: SolutionField,
    i: int,
    deviation_family: Sequence[Deviation],
    N: int,
    bundle: PathBundle,
    limit: LimitAgents | None = None,
    base: FiniteGameState | None = None
) -> DeviationGap:
    """
    max(0, J_i(reference) - min over the family of J_i(deviation)) with others frozen

    Differences are taken scenario by scenario under common random numbers.

    Raises:
        EmptyFamilyError: If the deviation family is empty
    """
    family = list(deviation_family)
    if not family:
        raise EmptyFamilyError("Deviation family is empty", {"agent": i})
    limit = limit if limit is not None else simulate_limit_agents(field_, spec, N, bundle)
    base = base if base is not None else simulate_finite_game(spec, limit, bundle, N)
    reference = cost_samples(spec, i, base)

    costs: Dict[str, float] = {}
    best_name, best_samples, best_mean = "", reference, np.inf
    for deviation in family:
        samples = cost_samples(spec, i, simulate_finite_game(spec, limit, bundle, N, (i, deviation)))
        mean = float(np.mean(samples))
        costs[deviation.name] = mean
        if mean < best_mean:
            best_name, best_samples, best_mean = deviation.name, samples, mean

    improvement = reference - best_samples
    gap = DeviationGap(
        agent=i,
        N=N,
        epsilon=max(0.0, float(np.mean(improvement))),
        stderr=_stderr(improvement),
        reference_cost=float(np.mean(reference)),
        reference_stderr=_stderr(reference),
        best=best_name,
        costs=costs,
    )
    logger.debug(
        "Deviation gap",
        extra={"extra": {"agent": i, "N": N, "epsilon": gap.epsilon, "stderr": gap.stderr, "best": best_name}}
    )
    return gap


# ============================================================================
# Scaling Report
# ============================================================================

@dataclass(frozen=True)
class ScalingFit:
    """Least-squares fit of log(value) against log(N) with a Student-t interval on the slope"""
    slope: float
    intercept: float
    ci_low: float
    ci_high: float
    n_points: int
    degenerate: bool


def fit_scaling(ns: Sequence[int], values: Sequence[float]) -> ScalingFit:
    """
    Fit over the strictly positive values; fewer than three of them is reported as degenerate
    """
    ns_arr = np.asarray(ns, dtype=float)
    vals = np.asarray(values, dtype=float)
    keep = np.isfinite(vals) & (vals > 0.0)
    n_points = int(keep.sum())
    if n_points < 3:
        return ScalingFit(np.nan, np.nan, np.nan, np.nan, n_points, True)

    fit = linregress(np.log(ns_arr[keep]), np.log(vals[keep]))
    half_width = float(student_t.ppf(0.5 + CI_LEVEL / 2.0, n_points - 2) * fit.stderr)
    return ScalingFit(
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        ci_low=float(fit.slope) - half_width,
        ci_high=float(fit.slope) + half_width,
        n_points=n_points,
        degenerate=False,
    )


@dataclass
class NashRow:
    N: int
    chaos_gap: float
    chaos_stderr: float
    gap_major: float
    gap_major_stderr: float
    gap_minor: float
    gap_minor_stderr: float
    best_major: str
    best_minor: str


REPORT_SERIES = ("chaos_gap", "gap_major", "gap_minor")


@dataclass
class NashReport:
    rows: List[NashRow]
    fits: Dict[str, ScalingFit] = field(default_factory=dict)
    minor_agent: int = 1

    @property
    def ns(self) -> List[int]:
        return [row.N for row in self.rows]

    def series(self, name: str) -> List[float]:
        return [getattr(row, name) for row in self.rows]


def _fit_all(rows: List[NashRow]) -> Dict[str, ScalingFit]:
    ns = [row.N for row in rows]
    return {name: fit_scaling(ns, [getattr(row, name) for row in rows]) for name in REPORT_SERIES}


def reference_field(spec: ModelSpec, field_: SolutionField, cfg: NashConfig) -> SolutionField:
    """
    The field whose particles stand in for the limit measure: the solved field itself, or
    its feedback maps pushed onto reference_particles particles when that is larger
    """
    K = cfg.n_replications
    if cfg.reference_particles <= field_.n_particles and K <= field_.n_scenarios:
        return field_
    bundle = sample_bundle(field_.grid, K, max(cfg.reference_particles, field_.n_particles),
                           spec.init_major, spec.init_minor, field_.seed)
    logger.info(
        "Re-simulating the limit measure flow",
        extra={"extra": {"n_scenarios": K, "n_particles": bundle.n_particles}}
    )
    return forward_field(spec, field_.maps, bundle, field_.diagnostics)


def scaling_report(spec: ModelSpec, field_: SolutionField, ns: Sequence[int], cfg: NashConfig) -> NashReport:
    """
    Chaos gap and deviation gaps (major and one minor agent) per agent count, with log-log fits

    Per-N runs share one agent bundle (smaller populations are its leading paths) and run
    on the worker pool.

    Raises:
        ConfigError: If fewer than three distinct agent counts are given
        ScalingAbortedError: If any per-N run fails; carries the completed rows as `partial`
    """
    ns = sorted(set(int(n) for n in ns))
    if len(ns) < 3 or ns[0] < 1:
        raise ConfigError("Scaling report needs at least three positive agent counts", {"ns": ns})
    if cfg.minor_agent > ns[0]:
        raise ConfigError("Deviating minor agent exceeds the smallest population", {"minor_agent": cfg.minor_agent})

    reference = reference_field(spec, field_, cfg)
    K = cfg.n_replications
    agents = sample_bundle(reference.grid, K, ns[-1], spec.init_major, spec.init_minor, reference.seed,
                           agent_kind=STREAM_KIND_LIMIT_AGENT)
    major_family = deviation_family_for(spec, reference.grid, 0, cfg)
    minor_family = deviation_family_for(spec, reference.grid, cfg.minor_agent, cfg)

    def run(N: int) -> NashRow | MFGError:
        try:
            bundle = agents.head(K, N)
            limit = simulate_limit_agents(reference, spec, N, bundle)
            base = simulate_finite_game(spec, limit, bundle, N)
            chaos = chaos_gap(limit, base)
            major = deviation_gap(spec, reference, 0, major_family, N, bundle, limit, base)
            minor = deviation_gap(spec, reference, cfg.minor_agent, minor_family, N, bundle, limit, base)
        except MFGError as e:
            logger.error("Scaling run failed", extra={"extra": {"N": N, "error": e.to_dict()}})
            return e
        logger.info(
            "Scaling run finished",
            extra={"extra": {"N": N, "chaos_gap": chaos.value, "gap_major": major.epsilon,
                             "gap_minor": minor.epsilon}}
        )
        return NashRow(N, chaos.value, chaos.stderr, major.epsilon, major.stderr,
                       minor.epsilon, minor.stderr, major.best, minor.best)

    outcomes = get_worker_pool().map("nash", run, ns)
    rows = [o for o in outcomes if isinstance(o, NashRow)]
    failures = {N: o for N, o in zip(ns, outcomes) if isinstance(o, MFGError)}

    report = NashReport(rows=rows, fits=_fit_all(rows), minor_agent=cfg.minor_agent)
    if failures:
        raise ScalingAbortedError(
            f"Scaling report aborted: {len(failures)} of {len(ns)} runs failed",
            {"failed": {str(N): e.to_dict() for N, e in failures.items()}, "completed": report.ns},
            partial=report,
        )
    return report
