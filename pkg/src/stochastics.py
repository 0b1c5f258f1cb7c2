"""
Time grids, seeded Brownian path bundles and empirical measures
Noise streams are keyed by (seed, kind, scenario, agent) so growing a bundle never changes existing paths
"""

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Tuple

import numpy as np

from .errors import (
    ArtifactIOError,
    ConfigError,
    EmptyBundleError,
    ModelEvaluationError,
    ScenarioMismatchError,
    SizeMismatchError,
)
from .logger import get_logger
from .model import InitialLaw, kernel_average


# ============================================================================
# Logger
# ============================================================================

logger = get_logger("mfg_solver.stochastics")

STREAM_KIND_SCENARIO = 0
STREAM_KIND_AGENT = 1
STREAM_KIND_LIMIT_AGENT = 2

BUNDLE_MAGIC = b"MFGPATHS"
BUNDLE_VERSION = 2
_HEADER = struct.Struct("<8sIQdIIII")


# ============================================================================
# Time Grid
# ============================================================================

@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_k = k T / n_steps on [0, T]"""
    horizon: float
    n_steps: int

    def __post_init__(self) -> None:
        if not self.horizon > 0.0:
            raise ConfigError("Grid horizon must be positive", {"horizon": self.horizon})
        if self.n_steps < 1:
            raise ConfigError("Grid needs at least one step", {"n_steps": self.n_steps})

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    @property
    def knots(self) -> np.ndarray:
        knots = np.arange(self.n_steps + 1, dtype=float) * self.horizon / self.n_steps
        knots[-1] = self.horizon
        return knots

    def time(self, k: int) -> float:
        return float(self.knots[k])

    def refine(self, factor: int) -> "TimeGrid":
        return TimeGrid(self.horizon, self.n_steps * factor)

    def index_of(self, t: float) -> Tuple[int, float]:
        """
        Locate t on the grid

        Returns:
            (k, w) with t = (1 - w) t_k + w t_{k+1}; w == 0 on a knot
        """
        if t < 0.0 or t > self.horizon:
            raise ConfigError(f"t = {t} lies outside [0, {self.horizon}]", {"t": t})
        pos = t / self.dt
        k = min(int(np.floor(pos)), self.n_steps)
        w = pos - k
        if abs(w) < 1e-12:
            return k, 0.0
        if abs(w - 1.0) < 1e-12:
            return k + 1, 0.0
        return k, float(w)


# ============================================================================
# Path Bundles
# ============================================================================

def stream(seed: int, kind: int, scenario: int, agent: int = 0) -> np.random.Generator:
    """Independent Philox generator for one (kind, scenario, agent) key"""
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(seed, spawn_key=(kind, scenario, agent)))
    )


@dataclass(frozen=True)
class PathBundle:
    """
    Discretised common and idiosyncratic Brownian increments plus initial states

    Shapes: dW0 (K, n), dW (K, M, n), xi0 (K,), xi (K, M). `agent_kind` names the stream
    family the idiosyncratic paths came from; the common noise never depends on it.
    """
    seed: int
    grid: TimeGrid
    dW0: np.ndarray
    dW: np.ndarray
    xi0: np.ndarray
    xi: np.ndarray
    agent_kind: int = STREAM_KIND_AGENT

    @property
    def n_scenarios(self) -> int:
        return int(self.dW0.shape[0])

    @property
    def n_particles(self) -> int:
        return int(self.dW.shape[1])

    def head(self, n_scenarios: int, n_particles: int | None = None) -> "PathBundle":
        """Leading scenarios/particles; identical to sampling the smaller bundle directly"""
        n_particles = self.n_particles if n_particles is None else n_particles
        if n_scenarios > self.n_scenarios or n_particles > self.n_particles:
            raise SizeMismatchError(
                "Requested head is larger than the bundle",
                {"requested": [n_scenarios, n_particles], "available": [self.n_scenarios, self.n_particles]}
            )
        return PathBundle(
            seed=self.seed,
            grid=self.grid,
            dW0=self.dW0[:n_scenarios],
            dW=self.dW[:n_scenarios, :n_particles],
            xi0=self.xi0[:n_scenarios],
            xi=self.xi[:n_scenarios, :n_particles],
            agent_kind=self.agent_kind,
        )

    def common_noise_of(self, other: "PathBundle") -> bool:
        """True when both bundles share seed, grid and the common noise of their overlapping scenarios"""
        if self.seed != other.seed or self.grid != other.grid:
            return False
        k = min(self.n_scenarios, other.n_scenarios)
        return bool(
            np.array_equal(self.dW0[:k], other.dW0[:k]) and np.array_equal(self.xi0[:k], other.xi0[:k])
        )


def sample_bundle(
    grid: TimeGrid,
    n_scenarios: int,
    n_particles: int,
    init_major: InitialLaw,
    init_minor: InitialLaw,
    seed: int,
    agent_kind: int = STREAM_KIND_AGENT
) -> PathBundle:
    """
    Draw a bundle of common-noise scenarios and idiosyncratic paths

    Scenario s draws (xi0, dW0) from stream (SCENARIO, s); particle i of scenario s
    draws (xi, dW) from stream (agent_kind, s, i).

    Raises:
        EmptyBundleError: If either count is below 1
        ConfigError: If agent_kind is not an idiosyncratic stream kind
    """
    if agent_kind not in (STREAM_KIND_AGENT, STREAM_KIND_LIMIT_AGENT):
        raise ConfigError("Unknown idiosyncratic stream kind", {"agent_kind": agent_kind})
    if n_scenarios < 1 or n_particles < 1:
        raise EmptyBundleError(
            "Bundle needs at least one scenario and one particle",
            {"n_scenarios": n_scenarios, "n_particles": n_particles}
        )

    n = grid.n_steps
    sqrt_dt = np.sqrt(grid.dt)
    dW0 = np.empty((n_scenarios, n))
    xi0 = np.empty(n_scenarios)
    dW = np.empty((n_scenarios, n_particles, n))
    xi = np.empty((n_scenarios, n_particles))

    for s in range(n_scenarios):
        rng = stream(seed, STREAM_KIND_SCENARIO, s)
        xi0[s] = init_major.sample(rng, 1)[0]
        dW0[s] = rng.standard_normal(n) * sqrt_dt
        for i in range(n_particles):
            rng = stream(seed, agent_kind, s, i)
            xi[s, i] = init_minor.sample(rng, 1)[0]
            dW[s, i] = rng.standard_normal(n) * sqrt_dt

    logger.debug(
        "Sampled path bundle",
        extra={"extra": {"seed": seed, "n_steps": n, "n_scenarios": n_scenarios, "n_particles": n_particles,
                         "agent_kind": agent_kind}}
    )
    return PathBundle(seed=seed, grid=grid, dW0=dW0, dW=dW, xi0=xi0, xi=xi, agent_kind=agent_kind)


def dump_bundle(bundle: PathBundle, path: Path) -> None:
    """
    Write a bundle for replay

    Layout: header (magic, version, seed, T, n_steps, K, M, agent_kind) then little-endian float64
    payload xi0, dW0, xi, dW in row-major scenario x (particle x) step order.

    Raises:
        ArtifactIOError: On write failure
    """
    header = _HEADER.pack(
        BUNDLE_MAGIC, BUNDLE_VERSION, bundle.seed, bundle.grid.horizon,
        bundle.grid.n_steps, bundle.n_scenarios, bundle.n_particles, bundle.agent_kind
    )
    try:
        with open(path, "wb") as f:
            f.write(header)
            for array in (bundle.xi0, bundle.dW0, bundle.xi, bundle.dW):
                f.write(np.ascontiguousarray(array, dtype="<f8").tobytes())
    except OSError as e:
        raise ArtifactIOError(f"Failed to write bundle: {e}", {"path": str(path)}) from e


def load_bundle(path: Path) -> PathBundle:
    """
    Read a bundle written by dump_bundle

    Raises:
        ArtifactIOError: On read failure, bad magic or truncated payload
    """
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise ArtifactIOError(f"Failed to read bundle: {e}", {"path": str(path)}) from e

    if len(raw) < _HEADER.size:
        raise ArtifactIOError("Bundle file is truncated", {"path": str(path)})
    magic, version, seed, horizon, n_steps, k, m, agent_kind = _HEADER.unpack_from(raw)
    if magic != BUNDLE_MAGIC or version != BUNDLE_VERSION:
        raise ArtifactIOError("Not a path bundle file", {"path": str(path), "version": version})

    sizes = [k, k * n_steps, k * m, k * m * n_steps]
    expected = _HEADER.size + 8 * sum(sizes)
    if len(raw) != expected:
        raise ArtifactIOError(
            "Bundle payload size does not match its header",
            {"path": str(path), "bytes": len(raw), "expected": expected}
        )

    payload = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).astype(float)
    xi0, dW0, xi, dW = np.split(payload, np.cumsum(sizes)[:-1])
    return PathBundle(
        seed=seed,
        grid=TimeGrid(horizon, n_steps),
        dW0=dW0.reshape(k, n_steps),
        dW=dW.reshape(k, m, n_steps),
        xi0=xi0,
        xi=xi.reshape(k, m),
        agent_kind=agent_kind,
    )


# ============================================================================
# Empirical Measures
# ============================================================================

@dataclass(frozen=True)
class ParticleEnsemble:
    """Empirical conditional law of the minor state in one common-noise scenario (uniform weights)"""
    scenario_id: int
    states: np.ndarray

    def __post_init__(self) -> None:
        states = np.asarray(self.states, dtype=float).reshape(-1)
        if states.size < 1:
            raise EmptyBundleError("Ensemble needs at least one particle", {"scenario": self.scenario_id})
        if not np.all(np.isfinite(states)):
            raise ModelEvaluationError("Ensemble contains non-finite states", {"scenario": self.scenario_id})
        object.__setattr__(self, "states", states)

    @property
    def size(self) -> int:
        return int(self.states.size)

    @property
    def mean(self) -> float:
        return float(self.states.mean())

    @property
    def second_moment(self) -> float:
        return float(np.mean(self.states ** 2))


def ensemble_of(states: np.ndarray, scenario: int) -> ParticleEnsemble:
    """Ensemble of scenario `scenario` from a (K, M) state slice"""
    return ParticleEnsemble(scenario_id=scenario, states=np.asarray(states)[scenario])


def w2_squared_sorted(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Squared W2 between equal-size empirical measures along the last axis"""
    return np.mean((np.sort(a, axis=-1) - np.sort(b, axis=-1)) ** 2, axis=-1)


def w2_distance_empirical(a: np.ndarray, b: np.ndarray) -> float:
    """
    Exact W2 distance between two equal-size empirical measures on the line

    Raises:
        SizeMismatchError: If the sample sizes differ or are zero
    """
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if a.size != b.size or a.size == 0:
        raise SizeMismatchError("W2 needs two non-empty samples of equal size", {"sizes": [a.size, b.size]})
    return float(np.sqrt(w2_squared_sorted(a, b)))


def pairing_bound_check(ensemble_a: ParticleEnsemble, ensemble_b: ParticleEnsemble) -> Tuple[float, float]:
    """
    Compare W2 squared with the index-paired mean squared difference

    Returns:
        (w2_squared, paired_mse); w2_squared <= paired_mse up to rounding

    Raises:
        ScenarioMismatchError: If the ensembles belong to different scenarios
        SizeMismatchError: If particle counts differ
    """
    if ensemble_a.scenario_id != ensemble_b.scenario_id:
        raise ScenarioMismatchError(
            "Pairing bound compares conditional laws of one scenario",
            {"scenarios": [ensemble_a.scenario_id, ensemble_b.scenario_id]}
        )
    if ensemble_a.size != ensemble_b.size:
        raise SizeMismatchError("Ensembles differ in size", {"sizes": [ensemble_a.size, ensemble_b.size]})
    w2_sq = float(w2_squared_sorted(ensemble_a.states, ensemble_b.states))
    paired = float(np.mean((ensemble_a.states - ensemble_b.states) ** 2))
    return w2_sq, paired


def measure_summary(ensemble: ParticleEnsemble, kernel: Callable[[float, np.ndarray], np.ndarray],
                    t: float = 0.0) -> float:
    """Uniform average of kernel(t, y) over the ensemble's particles"""
    return float(kernel_average(kernel, t, ensemble.states))
