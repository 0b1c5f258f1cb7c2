"""
Error hierarchy for the major/minor MFG solver
Every error carries a machine-readable code, structured details and the CLI exit code it maps to
"""

from typing import Any, Dict


# ============================================================================
# Exit Codes
# ============================================================================

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_CONFIG = 2
EXIT_VALIDATION = 3
EXIT_DIVERGENCE = 4
EXIT_IO = 5


# ============================================================================
# Base Error
# ============================================================================

class MFGError(Exception):
    """
    Base class of all solver errors

    Args:
        message: Human readable description
        details: Structured context (offending tuple, residual history, ...)
    """

    code = "mfg_error"
    error_type = "internal_error"
    exit_code = EXIT_INTERNAL

    def __init__(self, message: str, details: Dict[str, Any] | None = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_dict(self) -> Dict[str, Any]:
        """Error payload in the same shape the CLI writes to manifests"""
        return {
            "error": {
                "message": self.message,
                "type": self.error_type,
                "code": self.code,
                "details": self.details,
            }
        }


# ============================================================================
# Configuration / Input Errors
# ============================================================================

class ConfigError(MFGError):
    code = "config_error"
    error_type = "invalid_config"
    exit_code = EXIT_CONFIG


class EmptyBundleError(ConfigError):
    code = "empty_bundle"


class SizeMismatchError(ConfigError):
    code = "size_mismatch"


class ScenarioMismatchError(ConfigError):
    code = "scenario_mismatch"


class BundleMismatchError(ConfigError):
    code = "bundle_mismatch"


class UnpairedError(ConfigError):
    code = "unpaired_inputs"


class EmptyFamilyError(ConfigError):
    code = "empty_family"


class OracleUnavailableError(ConfigError):
    code = "oracle_unavailable"


# ============================================================================
# Model Errors
# ============================================================================

class AssumptionViolation(MFGError):
    code = "assumption_violation"
    error_type = "validation_error"
    exit_code = EXIT_VALIDATION


class ModelEvaluationError(AssumptionViolation):
    code = "model_evaluation_error"


# ============================================================================
# Numerical Errors
# ============================================================================

class NumericalError(MFGError):
    error_type = "numerical_error"
    exit_code = EXIT_DIVERGENCE


class MinimizerNotFoundError(NumericalError):
    code = "minimizer_not_found"


class DegenerateBasisError(NumericalError):
    code = "degenerate_basis"


class NonConvergenceError(NumericalError):
    code = "non_convergence"


class PicardDivergenceError(NumericalError):
    code = "picard_divergence"


class ContinuationStalledError(NumericalError):
    code = "continuation_stalled"


class RiccatiEscapeError(NumericalError):
    code = "riccati_escape"


class OracleMismatchError(NumericalError):
    code = "oracle_mismatch"


class ScalingAbortedError(NumericalError):
    """Raised by the Nash sweep; `partial` holds the per-N rows completed before the failure"""

    code = "scaling_aborted"

    def __init__(self, message: str, details: Dict[str, Any] | None = None, partial: Any = None):
        super().__init__(message, details)
        self.partial = partial


# ============================================================================
# I/O Errors
# ============================================================================

class ArtifactIOError(MFGError):
    code = "artifact_io_error"
    error_type = "io_error"
    exit_code = EXIT_IO
