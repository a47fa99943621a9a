"""
Config: solver defaults with optional overrides from .env.

Every value has a default so a missing .env is fine; an unreadable value
falls back to the default and logs a warning.
"""

import logging
import os

from dotenv import load_dotenv

load_dotenv()

logger = logging.getLogger(__name__)

DEFAULT_TAU = 0.125
DEFAULT_MAX_ITERATIONS = 5000
DEFAULT_TOLERANCE = 1e-3
DEFAULT_OUTER_ITERATIONS = 30
DEFAULT_OUTER_TOLERANCE = 1e-4
DEFAULT_WORKERS = 1
DEFAULT_LOG_LEVEL = "WARNING"
DEFAULT_OUTPUT_DIR = "output"


def env_str(name: str, default: str) -> str:
    value = os.getenv(name, "").strip()
    return value or default


def env_float(name: str, default: float) -> float:
    raw = os.getenv(name, "").strip()
    if not raw:
        return default
    try:
        return float(raw)
    except ValueError:
        logger.warning("%s=%r is not a number, using %s", name, raw, default)
        return default


def env_int(name: str, default: int) -> int:
    raw = os.getenv(name, "").strip()
    if not raw:
        return default
    try:
        return int(raw)
    except ValueError:
        logger.warning("%s=%r is not an integer, using %s", name, raw, default)
        return default


def solver_defaults() -> dict:
    """Projection and outer-loop settings after .env overrides."""
    return {
        "tau": env_float("TEXSEP_TAU", DEFAULT_TAU),
        "max_iterations": env_int("TEXSEP_MAX_ITERATIONS", DEFAULT_MAX_ITERATIONS),
        "tolerance": env_float("TEXSEP_TOLERANCE", DEFAULT_TOLERANCE),
        "outer_iterations": env_int("TEXSEP_OUTER_ITERATIONS", DEFAULT_OUTER_ITERATIONS),
        "outer_tolerance": env_float("TEXSEP_OUTER_TOLERANCE", DEFAULT_OUTER_TOLERANCE),
    }


def worker_count() -> int:
    """Threads used for independent sweep points and direction channels."""
    return max(1, env_int("TEXSEP_WORKERS", DEFAULT_WORKERS))


def log_level() -> str:
    return env_str("TEXSEP_LOG_LEVEL", DEFAULT_LOG_LEVEL).upper()


def output_dir() -> str:
    return env_str("TEXSEP_OUTPUT_DIR", DEFAULT_OUTPUT_DIR)
