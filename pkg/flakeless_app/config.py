"""
Configuration module for flakeless.
Loads environment variables from the .env file in the project root.
"""

from pathlib import Path
from dotenv import load_dotenv
import logging
import os
import sys

# Load .env file from the project root
env_path = Path(__file__).resolve().parent.parent / ".env"
load_dotenv(env_path)

TRUTHY = {"1", "true", "yes", "on"}


def _int_env(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"[ERROR] {name} must be an integer, got {raw!r}") from None


def _bool_env(name: str, default: bool = False) -> bool:
    raw = os.getenv(name)
    if raw is None:
        return default
    return raw.strip().lower() in TRUTHY


# Expose environment variables as constants
HOST = os.getenv("FLAKELESS_HOST", "0.0.0.0")
PORT = _int_env("FLAKELESS_PORT", 8080)
LAYOUT = os.getenv("FLAKELESS_LAYOUT", "standard")
EPOCH = os.getenv("FLAKELESS_EPOCH", "2024-01-01T00:00:00Z")
MAX_BACKWARD_MS = _int_env("FLAKELESS_MAX_BACKWARD_MS", 10)
BATCH_CAP = _int_env("FLAKELESS_BATCH_CAP", 10_000)
STATS_SHOW_IP = _bool_env("FLAKELESS_STATS_SHOW_IP")
METADATA_TIMEOUT_MS = _int_env("FLAKELESS_METADATA_TIMEOUT_MS", 1000)
METADATA_RETRIES = _int_env("FLAKELESS_METADATA_RETRIES", 2)
LOG_LEVEL = os.getenv("FLAKELESS_LOG_LEVEL", "INFO").upper()

# Ensure values are usable
if not 1 <= PORT <= 65535:
    raise ValueError(f"[ERROR] FLAKELESS_PORT must be in 1..65535, got {PORT}.")
if MAX_BACKWARD_MS < 0:
    raise ValueError("[ERROR] FLAKELESS_MAX_BACKWARD_MS must not be negative.")
if BATCH_CAP < 1:
    raise ValueError("[ERROR] FLAKELESS_BATCH_CAP must be at least 1.")
if METADATA_TIMEOUT_MS < 1 or METADATA_RETRIES < 0:
    raise ValueError("[ERROR] metadata timeout must be >= 1 ms and retries >= 0.")


def configure_logging(level: str = LOG_LEVEL, stream=None) -> None:
    """Send all flakeless logs to one stream (stdout unless told otherwise)."""
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
        stream=stream or sys.stdout,
    )


ACCESS_LOGGER = "flakeless.access"


def route_access_log(stream=None) -> logging.Handler:
    """Write flakeless.access lines to `stream` (stdout by default) and nowhere else."""
    access = logging.getLogger(ACCESS_LOGGER)
    for handler in [h for h in access.handlers if getattr(h, "flakeless_access", False)]:
        access.removeHandler(handler)
    handler = logging.StreamHandler(stream or sys.stdout)
    handler.setFormatter(logging.Formatter("%(message)s"))
    handler.flakeless_access = True
    access.addHandler(handler)
    access.setLevel(logging.INFO)
    access.propagate = False
    return handler
