"""
Model files and built-in instances
TOML model descriptions (kind = "lq" or "generic") validated with pydantic and built into ModelSpec objects
"""

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, List, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .config import CATALOG_PREFIX
from .errors import AssumptionViolation, ConfigError
from .logger import get_logger
from .lq_oracle import LQSpec
from .model import (
    InitialLaw,
    LinearCoefficient,
    MajorCostSpec,
    MinorCostSpec,
    ModelConstants,
    ModelSpec,
    affine_coefficient,
    affine_kernel,
    constant_kernel,
    identity_kernel,
)


# ============================================================================
# Logger
# ============================================================================

logger = get_logger("mfg_solver.catalog")


# ============================================================================
# File Schemas
# ============================================================================

class CoefficientEntry(BaseModel):
    """
    One linear state coefficient

    constant:  intercept, slope_x, slope_u are numbers and kernel_slope must be 0
    affine:    measure enters as intercept + kernel_slope * mean(m)
    tabulated: slope_x / slope_u are lists over `times`, linearly interpolated in t
    """
    model_config = ConfigDict(extra="forbid")

    kind: Literal["constant", "affine", "tabulated"] = "constant"
    intercept: float = 0.0
    kernel_slope: float = 0.0
    slope_x: float | List[float] = 0.0
    slope_u: float | List[float] = 0.0
    times: List[float] | None = None

    @model_validator(mode="after")
    def check_shape(self) -> "CoefficientEntry":
        tables = [v for v in (self.slope_x, self.slope_u) if isinstance(v, list)]
        if self.kind == "tabulated":
            if not self.times or len(self.times) < 2:
                raise ValueError("tabulated coefficients need at least two times")
            if any(b <= a for a, b in zip(self.times, self.times[1:])):
                raise ValueError("tabulated times must increase")
            if any(len(v) != len(self.times) for v in tables):
                raise ValueError("tabulated slopes must have one value per time")
        elif tables:
            raise ValueError(f"{self.kind} coefficients take scalar slopes")
        if self.kind == "constant" and self.kernel_slope != 0.0:
            raise ValueError("constant coefficients cannot depend on the measure; use kind = 'affine'")
        return self

    def largest_slope(self) -> float:
        values = np.abs(np.concatenate([np.atleast_1d(self.slope_x), np.atleast_1d(self.slope_u)]))
        return float(values.max())

    def build(self, name: str) -> LinearCoefficient:
        if self.kind != "tabulated":
            return affine_coefficient(name, self.intercept, self.kernel_slope, float(self.slope_x), float(self.slope_u))

        times = np.asarray(self.times, dtype=float)
        slope_x = np.broadcast_to(np.asarray(self.slope_x, dtype=float), times.shape).copy()
        slope_u = np.broadcast_to(np.asarray(self.slope_u, dtype=float), times.shape).copy()
        kernel = constant_kernel(self.intercept) if self.kernel_slope == 0.0 \
            else affine_kernel(self.intercept, self.kernel_slope)
        return LinearCoefficient(
            name=name,
            intercept_kernel=kernel,
            slope_x=lambda t: float(np.interp(t, times, slope_x)),
            slope_u=lambda t: float(np.interp(t, times, slope_u)),
        )


class CostEntry(BaseModel):
    """
    Quadratic cost, optionally with a convex kappa * log cosh(u) control term

    Major: f0 = (Q x0^2 + R u0^2)/2 + r x0 mean(m) [+ kappa log cosh u0], g0 = G x0^2 / 2
    Minor: f1 = R u^2 / 2 [+ kappa log cosh u], f2 = Q x^2 / 2 + rho x x0 + r x mean(m), g = G x^2 / 2
    """
    model_config = ConfigDict(extra="forbid")

    kind: Literal["quadratic", "quadratic_plus_smooth"] = "quadratic"
    Q: float = 0.0
    R: float = 1.0
    r: float = 0.0
    rho: float = 0.0
    G: float = 0.0
    kappa: float = 0.0

    @property
    def smooth(self) -> float:
        return self.kappa if self.kind == "quadratic_plus_smooth" else 0.0


class LQFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["lq"]
    name: str = "lq"
    horizon: float = 1.0
    coefficients: Dict[str, float] = Field(default_factory=dict)
    init_major: InitialLaw = Field(default_factory=InitialLaw)
    init_minor: InitialLaw = Field(default_factory=InitialLaw)


class GenericFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["generic"]
    name: str = "generic"
    horizon: float = 1.0
    b0: CoefficientEntry = Field(default_factory=CoefficientEntry)
    sigma0: CoefficientEntry = Field(default_factory=CoefficientEntry)
    b: CoefficientEntry = Field(default_factory=CoefficientEntry)
    sigma: CoefficientEntry = Field(default_factory=CoefficientEntry)
    sigma_tilde: CoefficientEntry = Field(default_factory=CoefficientEntry)
    major_cost: CostEntry = Field(default_factory=CostEntry)
    minor_cost: CostEntry = Field(default_factory=CostEntry)
    constants: ModelConstants | None = None
    init_major: InitialLaw = Field(default_factory=InitialLaw)
    init_minor: InitialLaw = Field(default_factory=InitialLaw)


# ============================================================================
# Builders
# ============================================================================

def _log_cosh(u: Any) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    return np.logaddexp(u, -u) - np.log(2.0)


def _major_cost(entry: CostEntry) -> MajorCostSpec:
    Q, R, r, G, kappa = entry.Q, entry.R, entry.r, entry.G, entry.smooth
    return MajorCostSpec(
        f0=lambda t, x0, u0, mbar: 0.5 * (Q * x0 * x0 + R * u0 * u0) + r * x0 * mbar + kappa * _log_cosh(u0),
        g0=lambda x0, mbar: 0.5 * G * x0 * x0,
        f0_x=lambda t, x0, u0, mbar: Q * x0 + r * mbar,
        f0_u=lambda t, x0, u0, mbar: R * np.asarray(u0, dtype=float) + kappa * np.tanh(u0),
        g0_x=lambda x0, mbar: G * np.asarray(x0, dtype=float),
        measure_kernel=identity_kernel,
        control_curvature=R if kappa == 0.0 else None,
    )


def _minor_cost(entry: CostEntry) -> MinorCostSpec:
    Q, R, r, rho, G, kappa = entry.Q, entry.R, entry.r, entry.rho, entry.G, entry.smooth
    return MinorCostSpec(
        f1=lambda t, x, u, x0: 0.5 * R * u * u + kappa * _log_cosh(u),
        f2=lambda t, x, mbar, x0: 0.5 * Q * x * x + rho * x * x0 + r * x * mbar,
        g=lambda x, mbar, x0: 0.5 * G * x * x,
        f1_x=lambda t, x, u, x0: np.zeros(np.shape(x)),
        f1_u=lambda t, x, u, x0: R * np.asarray(u, dtype=float) + kappa * np.tanh(u),
        f2_x=lambda t, x, mbar, x0: Q * x + rho * x0 + r * mbar,
        g_x=lambda x, mbar, x0: G * np.asarray(x, dtype=float),
        measure_kernel=identity_kernel,
        control_curvature=R if kappa == 0.0 else None,
    )


def _check_costs(name: str, major: CostEntry, minor: CostEntry) -> None:
    problems = []
    for label, entry in (("major_cost", major), ("minor_cost", minor)):
        if not entry.R > 0.0:
            problems.append(f"{label}.R must be positive")
        for key in ("Q", "G", "kappa"):
            if getattr(entry, key) < 0.0:
                problems.append(f"{label}.{key} must be non-negative")
    if minor.r < 0.0:
        problems.append("minor_cost.r must be non-negative")
    if problems:
        raise AssumptionViolation(f"Model {name!r} violates the standing assumptions", {"violations": problems})


def _derived_constants(doc: GenericFile) -> ModelConstants:
    major, minor = doc.major_cost, doc.minor_cost
    magnitudes = [doc.b0.largest_slope(), doc.sigma0.largest_slope(), doc.b.largest_slope(),
                  doc.sigma.largest_slope(), doc.sigma_tilde.largest_slope(),
                  abs(doc.b0.kernel_slope), abs(doc.sigma0.kernel_slope), abs(doc.b.kernel_slope),
                  abs(doc.sigma.kernel_slope), abs(doc.sigma_tilde.kernel_slope),
                  major.Q, major.R + major.smooth, abs(major.r), major.G,
                  minor.Q, minor.R + minor.smooth, abs(minor.r), abs(minor.rho), minor.G,
                  2.0 / major.R, 2.0 / minor.R]
    return ModelConstants(
        L=max([1.0] + magnitudes),
        L_m=max(abs(doc.b.kernel_slope), abs(doc.sigma.kernel_slope), abs(doc.sigma_tilde.kernel_slope)),
        l_m=max(abs(doc.b0.kernel_slope), abs(doc.sigma0.kernel_slope), abs(major.r)),
        l_x0=abs(minor.rho),
        C_f0=major.R / 2.0,
        C_f=minor.R / 2.0,
    )


def build_model(document: Dict[str, Any], source: str = "<memory>") -> ModelSpec:
    """
    Build a ModelSpec from a parsed model document

    Raises:
        ConfigError: On an unknown kind, unknown keys or malformed values
        AssumptionViolation: If the instance breaks convexity, positivity or constant orderings
    """
    kind = document.get("kind")
    try:
        if kind == "lq":
            doc = LQFile.model_validate(document)
            unknown = set(doc.coefficients) - (set(LQSpec.coefficient_names()) - {"horizon"})
            if unknown:
                raise ConfigError(f"Unknown LQ coefficients in {source}", {"unknown": sorted(unknown)})
            lq = LQSpec(**doc.coefficients, horizon=doc.horizon, init_major=doc.init_major,
                        init_minor=doc.init_minor, name=doc.name)
            spec = lq.to_model_spec()
        elif kind == "generic":
            doc = GenericFile.model_validate(document)
            _check_costs(doc.name, doc.major_cost, doc.minor_cost)
            spec = ModelSpec(
                b0=doc.b0.build("b0"),
                sigma0=doc.sigma0.build("sigma0"),
                b=doc.b.build("b"),
                sigma=doc.sigma.build("sigma"),
                sigma_tilde=doc.sigma_tilde.build("sigma_tilde"),
                major_cost=_major_cost(doc.major_cost),
                minor_cost=_minor_cost(doc.minor_cost),
                constants=doc.constants if doc.constants is not None else _derived_constants(doc),
                horizon=doc.horizon,
                init_major=doc.init_major,
                init_minor=doc.init_minor,
                name=doc.name,
            )
        else:
            raise ConfigError(f"Model kind must be 'lq' or 'generic', got {kind!r}", {"source": source})
    except ValidationError as e:
        raise ConfigError(
            f"Invalid model file {source}",
            {"errors": [{"loc": list(err["loc"]), "msg": err["msg"]} for err in e.errors()]}
        ) from e

    logger.debug("Model built", extra={"extra": {"model": spec.name, "kind": kind, "source": source}})
    return spec


# ============================================================================
# Built-in Instances
# ============================================================================

_BASE_LQ = {
    "a0": 0.1, "c0": 1.0, "s0": 0.3, "Q0": 1.0, "R0": 1.0, "G0": 0.5,
    "a": 0.2, "c": 1.0, "s": 0.3, "s_tilde": 0.2, "Q": 1.0, "R": 1.0, "G": 0.5,
}
_BASE_INIT = {
    "init_major": {"family": "point", "mean": 1.0},
    "init_minor": {"family": "gaussian", "mean": 0.5, "std": 0.5},
}


def _lq(name: str, **coefficients: float) -> Dict[str, Any]:
    return {"kind": "lq", "name": name, "horizon": 1.0,
            "coefficients": {**_BASE_LQ, **coefficients}, **_BASE_INIT}


# Our own instances, chosen to sit inside (or deliberately outside) the certified coupling regime
CATALOG: Dict[str, Dict[str, Any]] = {
    "lq_decoupled": _lq("lq_decoupled"),
    "lq_weak": _lq("lq_weak", e=0.04, e0=0.2, r0=0.2, rho=0.2, r=0.1),
    "lq_weak_alt": _lq("lq_weak_alt", e=0.02, e0=0.1, r0=0.1, rho=0.1, r=0.1),
    "lq_moderate": _lq("lq_moderate", e=0.3, e0=0.5, r0=0.5, rho=0.5, r=0.3),
    "lq_unit": {
        "kind": "lq", "name": "lq_unit", "horizon": 1.0,
        "coefficients": {"c0": 1.0, "Q0": 1.0, "R0": 1.0, "G0": 1.0, "c": 1.0, "s": 1.0,
                         "Q": 1.0, "R": 1.0, "G": 1.0},
        "init_major": {"family": "point", "mean": 1.0},
        "init_minor": {"family": "point", "mean": 1.0},
    },
    "trivial": {
        "kind": "lq", "name": "trivial", "horizon": 1.0,
        "coefficients": {"s0": 0.2, "s": 0.3, "s_tilde": 0.1},
        **_BASE_INIT,
    },
    "smooth_weak": {
        "kind": "generic", "name": "smooth_weak", "horizon": 1.0,
        "b0": {"kind": "affine", "kernel_slope": 0.2, "slope_x": 0.1, "slope_u": 1.0},
        "sigma0": {"kind": "constant", "intercept": 0.3},
        "b": {"kind": "tabulated", "kernel_slope": 0.04, "times": [0.0, 1.0],
              "slope_x": [0.2, 0.1], "slope_u": [1.0, 1.0]},
        "sigma": {"kind": "constant", "intercept": 0.3},
        "sigma_tilde": {"kind": "constant", "intercept": 0.2},
        "major_cost": {"kind": "quadratic", "Q": 1.0, "R": 1.0, "r": 0.2, "G": 0.5},
        "minor_cost": {"kind": "quadratic_plus_smooth", "Q": 1.0, "R": 1.0, "rho": 0.2, "r": 0.1,
                       "G": 0.5, "kappa": 0.2},
        **_BASE_INIT,
    },
}


def catalog_names() -> List[str]:
    return sorted(CATALOG)


def load_model(source: str | Path) -> ModelSpec:
    """
    Build a model from a catalog name ("lq_weak" or "catalog:lq_weak") or a TOML model file

    Raises:
        ConfigError: If the file is missing or unparsable, or the catalog name is unknown
        AssumptionViolation: If the instance breaks the standing assumptions
    """
    if isinstance(source, str) and source.startswith(CATALOG_PREFIX):
        name = source[len(CATALOG_PREFIX):]
        if name not in CATALOG:
            raise ConfigError(f"Unknown catalog model {name!r}", {"catalog": catalog_names()})
        source = name
    if isinstance(source, str) and source in CATALOG:
        return build_model(CATALOG[source], source=f"{CATALOG_PREFIX}{source}")

    path = Path(source)
    if not path.exists():
        raise ConfigError(f"Model file not found: {path}", {"path": str(path), "catalog": catalog_names()})
    try:
        with open(path, "rb") as f:
            document = tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"Failed to parse model TOML: {e}", {"path": str(path)}) from e
    except OSError as e:
        raise ConfigError(f"Failed to read model file: {e}", {"path": str(path)}) from e
    return build_model(document, source=str(path))
