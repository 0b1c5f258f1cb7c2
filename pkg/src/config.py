"""
Configuration loader for the major/minor MFG solver
Process settings come from the environment, run configs from TOML files with --set overrides
"""

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, List, Literal

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from .errors import ConfigError


# Note: Cannot import logger here to avoid circular dependency
# Logger is configured by the CLI once the run config is resolved


VALID_LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
CATALOG_PREFIX = "catalog:"


def _normalise_log_level(v: str) -> str:
    v_upper = v.upper()
    if v_upper not in VALID_LOG_LEVELS:
        raise ValueError(f"log_level must be one of {VALID_LOG_LEVELS}")
    return v_upper


# ============================================================================
# Process Settings
# ============================================================================

class AppSettings(BaseSettings):
    """Process-wide settings read from MFG_* environment variables and .env"""

    log_level: str = Field(default="INFO")
    log_to_console: bool = Field(default=True)
    threads: int = Field(default=1, ge=1, le=64)
    output_root: Path = Field(default=Path("runs"))

    model_config = SettingsConfigDict(
        env_prefix="MFG_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore"
    )

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Validate log level"""
        return _normalise_log_level(v)


# ============================================================================
# Run Config Sections
# ============================================================================

class GridConfig(BaseModel):
    """Time discretisation; the horizon itself comes from the model file"""
    n_steps: int = Field(default=100, ge=1, le=100_000)


class EnsembleConfig(BaseModel):
    """Common-noise scenarios (K) and particles per scenario (M)"""
    n_scenarios: int = Field(default=64, ge=1, le=100_000)
    n_particles: int = Field(default=256, ge=1, le=1_000_000)


class SolverConfig(BaseModel):
    """Fixed-point and continuation controls shared by every fbsde solver"""
    method: Literal["picard", "continuation", "both"] = "picard"
    picard_damping: float = Field(default=0.5, gt=0.0, le=1.0)
    max_picard: int = Field(default=200, ge=1, le=100_000)
    picard_tol: float = Field(default=1e-4, gt=0.0, lt=1.0)
    continuation_step: float = Field(default=0.25, gt=0.0, le=1.0)
    min_step: float = Field(default=1e-3, gt=0.0, le=1.0)
    max_phi_iterations: int = Field(default=60, ge=1, le=10_000)
    basis_degree: int = Field(default=1, ge=1, le=4)
    ridge: float = Field(default=1e-10, ge=0.0, lt=1.0)
    coupling_delta: float = Field(default=0.1, gt=0.0)
    divergence_patience: int = Field(default=5, ge=1)

    @model_validator(mode="after")
    def check_steps(self) -> "SolverConfig":
        if self.min_step >= self.continuation_step:
            raise ValueError("min_step must be smaller than continuation_step")
        return self


class ValidationConfig(BaseModel):
    """Monte Carlo spot checks of the structural assumptions"""
    sample_budget: int = Field(default=256, ge=1, le=1_000_000)
    tolerance: float = Field(default=1e-8, gt=0.0)
    box: float = Field(default=5.0, gt=0.0)


class OracleConfig(BaseModel):
    """Acceptance tolerance of the LQ oracle comparison (relative S-norm error)"""
    tolerance: float = Field(default=0.02, gt=0.0)
    refinement: int = Field(default=10, ge=1, le=1000)


class NashConfig(BaseModel):
    """Agent-count sweep of the epsilon-Nash harness"""
    ns: List[int] = Field(default_factory=lambda: [8, 16, 32, 64, 128, 256, 512])
    n_replications: int = Field(default=64, ge=2)
    offsets: List[float] = Field(default_factory=lambda: [-1.0, -0.1, 0.1, 1.0])
    scales: List[float] = Field(default_factory=lambda: [0.5, 1.5])
    minor_agent: int = Field(default=1, ge=1)
    reference_particles: int = Field(default=4096, ge=1, le=1_000_000)

    @field_validator("ns")
    @classmethod
    def validate_ns(cls, v: List[int]) -> List[int]:
        """Sort, deduplicate and require at least three positive agent counts"""
        ns = sorted(set(int(n) for n in v))
        if len(ns) < 3:
            raise ValueError("ns needs at least 3 distinct agent counts")
        if ns[0] < 1:
            raise ValueError("agent counts must be positive")
        return ns

    @model_validator(mode="after")
    def check_minor_agent(self) -> "NashConfig":
        if self.minor_agent > self.ns[0]:
            raise ValueError(f"minor_agent = {self.minor_agent} exceeds the smallest agent count {self.ns[0]}")
        return self


class RunConfig(BaseModel):
    """Fully resolved configuration of one CLI run"""
    model: str
    output_dir: Path = Field(default=Path("runs/latest"))
    seed: int = Field(default=0, ge=0, lt=2**64)
    threads: int = Field(default=1, ge=1, le=64)
    log_level: str = Field(default="INFO")
    grid: GridConfig = Field(default_factory=GridConfig)
    ensemble: EnsembleConfig = Field(default_factory=EnsembleConfig)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    validation: ValidationConfig = Field(default_factory=ValidationConfig)
    oracle: OracleConfig = Field(default_factory=OracleConfig)
    nash: NashConfig = Field(default_factory=NashConfig)
    dump_bundle: bool = False
    replay_bundle: Path | None = None
    stability_sweep: bool = False

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Validate log level"""
        return _normalise_log_level(v)

    def manifest_echo(self) -> Dict[str, Any]:
        """Resolved config as written to the run manifest"""
        return self.model_dump(mode="json")


# ============================================================================
# Loading
# ============================================================================

def parse_override_value(raw: str) -> Any:
    """
    Parse the value part of a --set override

    TOML scalars and arrays are accepted (numbers, booleans, quoted strings,
    [1, 2, 3]); anything else is kept as a bare string.
    """
    try:
        return tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        return raw


def apply_override(tree: Dict[str, Any], assignment: str) -> None:
    """
    Apply one `section.key=value` assignment to a raw config tree in place

    Raises:
        ConfigError: If the assignment has no '=' or an empty key
    """
    if "=" not in assignment:
        raise ConfigError(f"Override must look like key=value: {assignment!r}")
    key, raw = assignment.split("=", 1)
    parts = [p for p in key.strip().split(".") if p]
    if not parts:
        raise ConfigError(f"Override has an empty key: {assignment!r}")

    node = tree
    for part in parts[:-1]:
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise ConfigError(f"Override {key!r} descends into a non-table value")
        node = child
    node[parts[-1]] = parse_override_value(raw.strip())


def load_run_config(
    path: Path | None,
    overrides: List[str] | None = None,
    extra: Dict[str, Any] | None = None
) -> RunConfig:
    """
    Load, override and validate a run config

    Args:
        path: TOML run config (None for overrides-only runs)
        overrides: --set assignments applied in order
        extra: Already-parsed shorthand flags (seed, threads, output_dir); output_dir defaults
            to <MFG_OUTPUT_ROOT>/latest

    Returns:
        Validated RunConfig; a relative `model` path is resolved against the
        config file's directory

    Raises:
        ConfigError: On missing files, TOML syntax errors or invalid values
    """
    tree: Dict[str, Any] = {}
    base_dir = Path.cwd()

    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"Config file not found: {path}", {"path": str(path)})
        try:
            with open(path, "rb") as f:
                tree = tomllib.load(f)
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"Failed to parse config TOML: {e}", {"path": str(path)}) from e
        base_dir = path.parent

    for assignment in overrides or []:
        apply_override(tree, assignment)
    for key, value in (extra or {}).items():
        if value is not None:
            tree[key] = value

    tree.setdefault("output_dir", str(get_settings().output_root / "latest"))

    if "model" not in tree:
        raise ConfigError("Run config does not name a model file ('model = ...')")

    model = str(tree["model"])
    from_catalog = model.startswith(CATALOG_PREFIX)
    if not from_catalog:
        model_path = Path(model)
        if not model_path.is_absolute() and not model_path.exists():
            model_path = base_dir / model_path
        tree["model"] = str(model_path)
    if tree.get("replay_bundle"):
        bundle_path = Path(str(tree["replay_bundle"]))
        if not bundle_path.is_absolute() and not bundle_path.exists():
            tree["replay_bundle"] = str(base_dir / bundle_path)

    try:
        config = RunConfig.model_validate(tree)
    except ValidationError as e:
        raise ConfigError(
            "Invalid run config",
            {"errors": [{"loc": list(err["loc"]), "msg": err["msg"]} for err in e.errors()]}
        ) from e

    if not from_catalog and not Path(config.model).exists():
        raise ConfigError(f"Model file not found: {config.model}", {"path": config.model})
    return config


# Singleton settings instance
_settings: AppSettings | None = None


def get_settings() -> AppSettings:
    """Get singleton settings instance"""
    global _settings
    if _settings is None:
        _settings = AppSettings()
    return _settings
