"""
Logging system for the major/minor MFG solver
Structured JSON logs per run directory, with numpy payloads converted to JSON-native values
"""

import json
import logging
import math
from datetime import datetime
from pathlib import Path
from typing import Any

import numpy as np


# ============================================================================
# Constants
# ============================================================================

LOGGER_NAME = "mfg_solver"
RUN_LOG_FILE = "run.log"
ERROR_LOG_FILE = "error.log"


# ============================================================================
# Payload Conversion
# ============================================================================

def to_jsonable(data: Any, max_items: int = 32) -> Any:
    """
    Recursively convert a log payload into JSON-native values

    Args:
        data: dict, list, numpy array/scalar or primitive
        max_items: Arrays longer than this are summarised instead of dumped

    Returns:
        Structure accepted by json.dumps; non-finite floats become strings
    """
    if isinstance(data, dict):
        return {str(key): to_jsonable(value, max_items) for key, value in data.items()}

    if isinstance(data, (list, tuple)):
        return [to_jsonable(item, max_items) for item in data]

    if isinstance(data, np.ndarray):
        if data.size > max_items:
            finite = data[np.isfinite(data)] if data.dtype.kind == "f" else data
            return {
                "shape": list(data.shape),
                "min": to_jsonable(finite.min()) if finite.size else None,
                "max": to_jsonable(finite.max()) if finite.size else None,
            }
        return to_jsonable(data.tolist(), max_items)

    if isinstance(data, np.generic):
        return to_jsonable(data.item(), max_items)

    if isinstance(data, float) and not math.isfinite(data):
        return repr(data)

    if isinstance(data, Path):
        return str(data)

    return data


# ============================================================================
# Custom JSON Formatter
# ============================================================================

class JsonFormatter(logging.Formatter):
    """
    Custom formatter that outputs JSON-structured logs
    """

    def format(self, record: logging.LogRecord) -> str:
        """
        Format log record as JSON

        Args:
            record: Log record

        Returns:
            JSON-formatted log string
        """
        log_data = {
            "timestamp": datetime.now().isoformat(),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
        }

        if hasattr(record, "extra"):
            log_data["extra"] = to_jsonable(record.extra)

        if record.exc_info:
            log_data["exception"] = self.formatException(record.exc_info)

        return json.dumps(log_data, ensure_ascii=False)


# ============================================================================
# Logger Setup
# ============================================================================

def setup_logger(
    log_level: str = "INFO",
    log_dir: Path | None = None,
    enable_console: bool = True
) -> logging.Logger:
    """
    Setup the solver logger with JSON file output and optional console output

    Args:
        log_level: Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        log_dir: Run directory receiving run.log and error.log (None: no files)
        enable_console: Whether to also output to console

    Returns:
        Configured logger instance
    """
    logger = logging.getLogger(LOGGER_NAME)
    logger.setLevel(getattr(logging, log_level.upper()))
    logger.propagate = False

    for handler in list(logger.handlers):
        handler.close()
    logger.handlers.clear()

    json_formatter = JsonFormatter()

    if log_dir is not None:
        log_dir = Path(log_dir)
        log_dir.mkdir(parents=True, exist_ok=True)

        file_handler = logging.FileHandler(log_dir / RUN_LOG_FILE, encoding="utf-8")
        file_handler.setLevel(getattr(logging, log_level.upper()))
        file_handler.setFormatter(json_formatter)
        logger.addHandler(file_handler)

        error_handler = logging.FileHandler(log_dir / ERROR_LOG_FILE, encoding="utf-8")
        error_handler.setLevel(logging.ERROR)
        error_handler.setFormatter(json_formatter)
        logger.addHandler(error_handler)

    if enable_console:
        console_handler = logging.StreamHandler()
        console_handler.setLevel(getattr(logging, log_level.upper()))
        console_formatter = logging.Formatter(
            "%(asctime)s [%(levelname)s] %(message)s",
            datefmt="%Y-%m-%d %H:%M:%S"
        )
        console_handler.setFormatter(console_formatter)
        logger.addHandler(console_handler)

    return logger


def get_logger(name: str = LOGGER_NAME) -> logging.Logger:
    """
    Get logger instance

    Args:
        name: Logger name; dotted children of mfg_solver share its handlers

    Returns:
        Logger instance
    """
    return logging.getLogger(name)
