from __future__ import annotations

import os

from utils.logger import get_logger

logger = get_logger(__name__)

DEFAULT_SAMPLES = 1_000_000
DEFAULT_SEED = 2024


def load_env() -> None:
    try:
        from dotenv import load_dotenv  # type: ignore
    except Exception:
        return
    load_dotenv()


def _get_int(name: str, default: int, minimum: int = 1) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default

    try:
        value = int(raw)
    except ValueError:
        logger.warning(
            "[config] Invalid %s=%r; falling back to default %d", name, raw, default
        )
        return default

    if value < minimum:
        logger.warning(
            "[config] %s=%d below minimum %d; falling back to default %d",
            name,
            value,
            minimum,
            default,
        )
        return default

    return value


def worker_threads() -> int:
    """
    Worker cap for Monte Carlo block evaluation (CONVEXITY_ATLAS_THREADS).
    Only changes wall time: blocks are combined in index order regardless.
    """
    return _get_int("CONVEXITY_ATLAS_THREADS", os.cpu_count() or 1)


def default_samples() -> int:
    return _get_int("CONVEXITY_ATLAS_SAMPLES", DEFAULT_SAMPLES, minimum=1000)


def default_seed() -> int:
    return _get_int("CONVEXITY_ATLAS_SEED", DEFAULT_SEED, minimum=0)
