"""
Minimum-distance detection and seeded Monte Carlo error rates in AWGN.

Every estimator draws its noise from atlas.sampling with the same (seed,
samples), so SER, PEP and BER computed with one seed share a single sample
stream: each sample lands in exactly one decision region, which keeps the
SER = Σ PEP identity exact on counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Union

import numpy as np
from scipy.special import erfc

from atlas.constellation import ChannelParams, Constellation, hamming_matrix
from atlas.errors import PreconditionError, UsageError, ValidationError
from atlas.sampling import accumulate, gaussian
from utils.logger import get_logger

logger = get_logger(__name__)

AXES = ("snr", "noise_power")


@dataclass(frozen=True)
class Estimate:
    mean: float
    std_err: float
    samples: int
    seed: int
    hits: Optional[int] = None
    note: Optional[str] = None

    def to_dict(self) -> Dict[str, object]:
        return {
            "mean": self.mean,
            "std_err": self.std_err,
            "samples": self.samples,
            "seed": self.seed,
            "hits": self.hits,
            "note": self.note,
        }


@dataclass(frozen=True)
class Target:
    """What an error rate refers to: ser, ser:i, pep:i:j or ber."""

    kind: str
    i: Optional[int] = None
    j: Optional[int] = None

    def __str__(self) -> str:
        if self.kind == "pep":
            return f"pep:{self.i}:{self.j}"
        if self.kind == "ser" and self.i is not None:
            return f"ser:{self.i}"
        return self.kind


def parse_target(text: str) -> Target:
    parts = text.strip().lower().split(":")
    try:
        idx = [int(p) for p in parts[1:]]
    except ValueError:
        raise UsageError(f"bad target {text!r}: indices must be integers")

    if parts[0] == "ser" and len(idx) == 0:
        return Target("ser")
    if parts[0] == "ser" and len(idx) == 1:
        return Target("ser", i=idx[0])
    if parts[0] == "ber" and len(idx) == 0:
        return Target("ber")
    if parts[0] == "pep" and len(idx) == 2:
        if idx[0] == idx[1]:
            raise UsageError(f"bad target {text!r}: pairwise error needs i != j")
        return Target("pep", i=idx[0], j=idx[1])
    raise UsageError(f"bad target {text!r}: expected ser, ser:i, pep:i:j or ber")


def channel_at(axis: str, value: float) -> ChannelParams:
    if axis == "snr":
        return ChannelParams.from_snr(value)
    if axis == "noise_power":
        return ChannelParams.from_noise_power(value)
    raise UsageError(f"unknown axis {axis!r}; expected one of {AXES}")


# -----------------------------
# Q-function and closed forms
# -----------------------------
def q_function(x: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Gaussian tail Pr{N(0,1) > x} via the complementary error function."""
    out = 0.5 * erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))
    return float(out) if np.ndim(out) == 0 else out


def _bpsk_ser(gamma: float) -> float:
    return q_function(math.sqrt(gamma))


def _qpsk_ser(gamma: float) -> float:
    u = q_function(math.sqrt(gamma / 2.0))
    return 1.0 - (1.0 - u) ** 2


SER_ORACLES: Dict[str, Callable[[float], float]] = {
    "bpsk": _bpsk_ser,
    "qpsk": _qpsk_ser,
}

BER_ORACLES: Dict[str, Callable[[float], float]] = {
    "bpsk": _bpsk_ser,
    "qpsk": lambda gamma: q_function(math.sqrt(gamma / 2.0)),
}


def oracle_ser(kind: str, gamma: float) -> float:
    fn = SER_ORACLES.get(kind)
    if fn is None:
        raise ValidationError(f"no SER oracle for {kind!r}; known: {sorted(SER_ORACLES)}")
    if gamma <= 0:
        raise PreconditionError(f"SNR must be positive, got {gamma}")
    return fn(gamma)


def oracle_ber(kind: str, gamma: float) -> float:
    fn = BER_ORACLES.get(kind)
    if fn is None:
        raise ValidationError(f"no BER oracle for {kind!r}; known: {sorted(BER_ORACLES)}")
    if gamma <= 0:
        raise PreconditionError(f"SNR must be positive, got {gamma}")
    return fn(gamma)


# -----------------------------
# Detection
# -----------------------------
def ml_detect(c: Constellation, r: np.ndarray) -> int:
    """Index of the nearest constellation point; ties go to the lowest index."""
    r = np.asarray(r, dtype=float).reshape(-1)
    if r.shape[0] != c.dim:
        raise ValidationError(f"received vector has dimension {r.shape[0]}, expected {c.dim}")
    return int(np.argmin(np.linalg.norm(c.points - r, axis=1)))


def detect_batch(points: np.ndarray, received: np.ndarray) -> np.ndarray:
    """Vectorised nearest-point decisions for a batch of received vectors (k, n)."""
    energy = np.sum(points * points, axis=1)
    score = energy[None, :] - 2.0 * (received @ points.T)
    return np.argmin(score, axis=1)


def _check_run(samples: int, seed: int) -> None:
    if samples < 1:
        raise PreconditionError(f"samples must be >= 1, got {samples}")
    if seed < 0:
        raise PreconditionError(f"seed must be >= 0, got {seed}")


def _tail_note(mean: float, samples: int) -> Optional[str]:
    if mean > 0:
        return None
    return f"no events in {samples} samples; true value below ~{3.0 / samples:.1e}, reported as 0"


def _bernoulli(hits: int, samples: int, seed: int) -> Estimate:
    mean = hits / samples
    return Estimate(
        mean=mean,
        std_err=math.sqrt(mean * (1.0 - mean) / samples),
        samples=samples,
        seed=seed,
        hits=hits,
        note=_tail_note(mean, samples),
    )


def decision_counts(
    c: Constellation, i: int, ch: ChannelParams, samples: int, seed: int
) -> np.ndarray:
    """How often s_i + ξ is decoded to each point, over the seeded stream."""
    _check_run(samples, seed)
    if not 0 <= i < c.size:
        raise PreconditionError(f"point index {i} outside 0..{c.size - 1}")
    points = c.points
    sigma = ch.sigma
    eye = np.eye(c.size)

    def kernel(z: np.ndarray) -> np.ndarray:
        return eye[detect_batch(points, points[i] + sigma * z)]

    moments = accumulate(samples, seed, gaussian(c.dim), kernel)
    return np.rint(moments.total).astype(np.int64)


def pep_mc(
    c: Constellation, i: int, j: int, ch: ChannelParams, samples: int, seed: int
) -> Estimate:
    if i == j:
        raise PreconditionError("pairwise error needs i != j")
    if not 0 <= j < c.size:
        raise PreconditionError(f"point index {j} outside 0..{c.size - 1}")
    counts = decision_counts(c, i, ch, samples, seed)
    return _bernoulli(int(counts[j]), samples, seed)


def ser_mc(c: Constellation, i: int, ch: ChannelParams, samples: int, seed: int) -> Estimate:
    counts = decision_counts(c, i, ch, samples, seed)
    return _bernoulli(int(samples - counts[i]), samples, seed)


def _weighted_mc(
    c: Constellation, ch: ChannelParams, samples: int, seed: int, loss: np.ndarray
) -> Estimate:
    """
    Prior-weighted loss averaged over the stream: per sample Σ_i p_i·loss[i, ŝ_i].
    """
    _check_run(samples, seed)
    points = c.points
    priors = c.priors
    sigma = ch.sigma

    def kernel(z: np.ndarray) -> np.ndarray:
        noise = sigma * z
        acc = np.zeros(z.shape[0])
        for i in range(points.shape[0]):
            if priors[i] == 0.0:
                continue
            acc += priors[i] * loss[i, detect_batch(points, points[i] + noise)]
        return acc

    moments = accumulate(samples, seed, gaussian(c.dim), kernel)
    mean = float(moments.mean[0])
    return Estimate(
        mean=mean,
        std_err=float(moments.std_err[0]),
        samples=samples,
        seed=seed,
        note=_tail_note(mean, samples),
    )


def ser_avg_mc(c: Constellation, ch: ChannelParams, samples: int, seed: int) -> Estimate:
    loss = 1.0 - np.eye(c.size)
    return _weighted_mc(c, ch, samples, seed, loss)


def ber_mc(c: Constellation, ch: ChannelParams, samples: int, seed: int) -> Estimate:
    """Expected Hamming errors per transmitted bit (requires labels)."""
    mapping = hamming_matrix(c)
    loss = mapping.hamming / float(mapping.bits_per_symbol)
    return _weighted_mc(c, ch, samples, seed, loss)


def ber_from_peps(c: Constellation, ch: ChannelParams, samples: int, seed: int) -> float:
    """BER as the Hamming-weighted sum of per-pair PEP estimates (cross-check path)."""
    mapping = hamming_matrix(c)
    total = 0.0
    for i in range(c.size):
        if c.priors[i] == 0.0:
            continue
        counts = decision_counts(c, i, ch, samples, seed)
        for j in range(c.size):
            if j != i:
                total += mapping.hamming[i, j] * c.priors[i] * counts[j] / samples
    return total / mapping.bits_per_symbol


# -----------------------------
# Metric factory
# -----------------------------
Metric = Callable[[float, int, int], Estimate]


def metric_for(c: Constellation, target: Target, axis: str) -> Metric:
    """Error-rate estimator of `target` as a function of (axis value, samples, seed)."""
    if target.kind == "ber":
        hamming_matrix(c)

    def _metric(value: float, samples: int, seed: int) -> Estimate:
        ch = channel_at(axis, value)
        if target.kind == "pep":
            return pep_mc(c, target.i, target.j, ch, samples, seed)
        if target.kind == "ser" and target.i is not None:
            return ser_mc(c, target.i, ch, samples, seed)
        if target.kind == "ser":
            return ser_avg_mc(c, ch, samples, seed)
        return ber_mc(c, ch, samples, seed)

    return _metric
