"""
Counter-based random streams shared by every Monte Carlo estimator.

The sample budget is cut into fixed-size blocks. Block k draws from a Philox
generator keyed by SeedSequence([seed, k]), so a block's numbers depend only
on (seed, k). Workers may evaluate blocks in any order; per-block sums are
always combined in block order, which makes results independent of the
worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Tuple

import numpy as np

from atlas.errors import PreconditionError
from utils.config import worker_threads
from utils.logger import get_logger

logger = get_logger(__name__)

BLOCK_SIZE = 1 << 15

SAMPLER_TRANSFORM = (
    "numpy Philox4x64-10 keyed by SeedSequence([seed, block]); "
    "Generator.standard_normal (ziggurat) for Gaussian draws, "
    "Generator.chisquare for norm-squared draws"
)

Draw = Callable[[np.random.Generator, int], np.ndarray]
Kernel = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Moments:
    """Column sums and sums of squares of per-sample values."""

    total: np.ndarray
    total_sq: np.ndarray
    samples: int

    @property
    def mean(self) -> np.ndarray:
        return self.total / self.samples

    @property
    def std_err(self) -> np.ndarray:
        mean = self.mean
        var = np.maximum(self.total_sq / self.samples - mean * mean, 0.0)
        return np.sqrt(var / self.samples)


def sampler_metadata() -> Dict[str, object]:
    return {
        "transform": SAMPLER_TRANSFORM,
        "block_size": BLOCK_SIZE,
        "partition": "fixed blocks of block_size samples (last block short); "
        "per-block sums combined in block order",
    }


def block_generator(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, block])))


def gaussian(dim: int) -> Draw:
    def _draw(rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.standard_normal((size, dim))

    return _draw


def chi_square(dof: int) -> Draw:
    def _draw(rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.chisquare(dof, size)

    return _draw


def _blocks(samples: int) -> List[Tuple[int, int]]:
    full, rest = divmod(samples, BLOCK_SIZE)
    out = [(k, BLOCK_SIZE) for k in range(full)]
    if rest:
        out.append((full, rest))
    return out


def accumulate(samples: int, seed: int, draw: Draw, kernel: Kernel) -> Moments:
    """
    Evaluate `kernel` on every block of draws and return the column moments.

    kernel maps a block of draws (size × ...) to per-sample values of shape
    (size,) or (size, k).
    """
    if samples < 1:
        raise PreconditionError(f"samples must be >= 1, got {samples}")
    if seed < 0:
        raise PreconditionError(f"seed must be >= 0, got {seed}")

    def _one(block: Tuple[int, int]) -> Tuple[np.ndarray, np.ndarray]:
        k, size = block
        values = np.asarray(kernel(draw(block_generator(seed, k), size)), dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        return values.sum(axis=0), (values * values).sum(axis=0)

    blocks = _blocks(samples)
    workers = min(worker_threads(), len(blocks))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_one, blocks))
    else:
        parts = [_one(b) for b in blocks]

    total = np.zeros_like(parts[0][0])
    total_sq = np.zeros_like(parts[0][1])
    for s, sq in parts:
        total = total + s
        total_sq = total_sq + sq

    logger.debug("[mc] %d samples over %d blocks (%d workers)", samples, len(blocks), workers)
    return Moments(total=total, total_sq=total_sq, samples=samples)
