"""
Second derivatives of error rates in SNR and in noise power.

An error rate is an integral of the noise density over decision regions, so
its second derivative is the integral of d²p_ξ over the same regions. Those
integrals are estimated as expectations under p_ξ itself:

    d²/dγ²   ->  E[ 1{x ∈ region} · f_snr(|x|², γ, n) / 4 ]
    d²/dP_N² ->  E[ 1{x ∈ region} · f_noise(|x|², P_N, n) / (4 P_N⁴) ]

Both weights are the analytic second derivative divided by the density.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np
from scipy.stats import norm

from atlas.constellation import Constellation, hamming_matrix
from atlas.error_engine import AXES, Estimate, Target, detect_batch, q_function
from atlas.errors import PreconditionError, UsageError, ValidationError
from atlas.sampling import accumulate, gaussian
from utils.logger import get_logger

logger = get_logger(__name__)

CONFIDENCE_Z = 3.0


@dataclass(frozen=True)
class CurvatureConstants:
    n: int
    alpha1: float
    alpha2: float
    beta1: float
    beta2: float

    @classmethod
    def for_dim(cls, n: int) -> "CurvatureConstants":
        if n < 1:
            raise PreconditionError(f"dimension must be >= 1, got {n}")
        root_a = math.sqrt(2.0 * n)
        root_b = math.sqrt(2.0 * (n + 2))
        return cls(
            n=n,
            alpha1=n + root_a,
            alpha2=n - root_a,
            beta1=n + 2 + root_b,
            beta2=n + 2 - root_b,
        )


@dataclass(frozen=True)
class CurvatureEstimate:
    value: float
    std_err: float
    samples: int
    axis: str
    at: float
    seed: int = 0

    @property
    def z(self) -> float:
        if self.std_err == 0.0:
            return math.inf if self.value != 0.0 else 0.0
        return abs(self.value) / self.std_err

    @property
    def sign(self) -> str:
        """'+' or '-' when |value| > 3·std_err, '0' otherwise."""
        if self.z <= CONFIDENCE_Z:
            return "0"
        return "+" if self.value > 0 else "-"

    @property
    def verdict(self) -> str:
        return {"+": "convex", "-": "concave", "0": "indeterminate"}[self.sign]

    def to_dict(self) -> Dict[str, object]:
        return {
            "axis": self.axis,
            "at": self.at,
            "value": self.value,
            "std_err": self.std_err,
            "samples": self.samples,
            "seed": self.seed,
            "sign": self.sign,
        }


# -----------------------------
# Density and its analytic second derivatives
# -----------------------------
def _sq_norm(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.sum(x * x, axis=-1)


def f_snr(t, gamma: float, n: int):
    if gamma <= 0:
        raise PreconditionError(f"SNR must be positive, got {gamma}")
    k = CurvatureConstants.for_dim(n)
    return (t - k.alpha1 / gamma) * (t - k.alpha2 / gamma)


def f_noise(t, noise_power: float, n: int):
    if noise_power <= 0:
        raise PreconditionError(f"noise power must be positive, got {noise_power}")
    k = CurvatureConstants.for_dim(n)
    return (t - k.beta1 * noise_power) * (t - k.beta2 * noise_power)


def noise_pdf(x, noise_power: float):
    """Density of N(0, P_N·I) at x; x is (n,) or (k, n)."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    t = _sq_norm(x)
    return (2.0 * math.pi * noise_power) ** (-n / 2.0) * np.exp(-t / (2.0 * noise_power))


def d2_pdf_dsnr(x, gamma: float, n: Optional[int] = None):
    x = np.asarray(x, dtype=float)
    n = x.shape[-1] if n is None else n
    t = _sq_norm(x)
    return 0.25 * noise_pdf(x, 1.0 / gamma) * f_snr(t, gamma, n)


def d2_pdf_dnoise(x, noise_power: float, n: Optional[int] = None):
    # prefactor (2πP_N)^{-n/2}, the exact derivative of the density
    x = np.asarray(x, dtype=float)
    n = x.shape[-1] if n is None else n
    t = _sq_norm(x)
    return noise_pdf(x, noise_power) * f_noise(t, noise_power, n) / (4.0 * noise_power**4)


# -----------------------------
# Monte Carlo curvature
# -----------------------------
Loss = Dict[int, np.ndarray]


def _weight(axis: str, value: float, n: int) -> Tuple[float, Callable[[np.ndarray], np.ndarray]]:
    """(noise scale, importance weight of |x|²) for an evaluation point."""
    if value <= 0:
        raise PreconditionError(f"{axis} evaluation point must be positive, got {value}")
    if axis == "snr":
        return 1.0 / math.sqrt(value), lambda t: f_snr(t, value, n) / 4.0
    if axis == "noise_power":
        return math.sqrt(value), lambda t: f_noise(t, value, n) / (4.0 * value**4)
    raise UsageError(f"unknown axis {axis!r}; expected one of {AXES}")


def curvature_mc(
    c: Constellation,
    losses: Loss,
    axis: str,
    value: float,
    samples: int,
    seed: int,
) -> CurvatureEstimate:
    """
    Second derivative of Σ_i E[loss_i[ŝ(s_i + ξ)]] along `axis`.

    losses maps a transmitted index to a length-M vector over decisions.
    All transmitted points reuse the same noise block.
    """
    scale, weight = _weight(axis, value, c.dim)
    points = c.points

    def kernel(z: np.ndarray) -> np.ndarray:
        x = scale * z
        w = weight(np.sum(x * x, axis=1))
        acc = np.zeros(z.shape[0])
        for i, loss in losses.items():
            acc += loss[detect_batch(points, points[i] + x)]
        return acc * w

    moments = accumulate(samples, seed, gaussian(c.dim), kernel)
    est = CurvatureEstimate(
        value=float(moments.mean[0]),
        std_err=float(moments.std_err[0]),
        samples=samples,
        axis=axis,
        at=value,
        seed=seed,
    )
    logger.debug("[curvature] %s at %g: %.6g ± %.2g", axis, value, est.value, est.std_err)
    return est


def _pair_loss(c: Constellation, i: int, j: int) -> Loss:
    if i == j:
        raise PreconditionError("pairwise curvature needs i != j")
    for k in (i, j):
        if not 0 <= k < c.size:
            raise PreconditionError(f"point index {k} outside 0..{c.size - 1}")
    return {i: np.eye(c.size)[j]}


def _point_loss(c: Constellation, i: int) -> Loss:
    if not 0 <= i < c.size:
        raise PreconditionError(f"point index {i} outside 0..{c.size - 1}")
    return {i: 1.0 - np.eye(c.size)[i]}


def _ser_loss(c: Constellation) -> Loss:
    eye = np.eye(c.size)
    return {i: c.priors[i] * (1.0 - eye[i]) for i in range(c.size) if c.priors[i] > 0}


def _ber_loss(c: Constellation) -> Loss:
    mapping = hamming_matrix(c)
    return {
        i: c.priors[i] * mapping.hamming[i] / mapping.bits_per_symbol
        for i in range(c.size)
        if c.priors[i] > 0
    }


def target_loss(c: Constellation, target: Target) -> Loss:
    if target.kind == "pep":
        return _pair_loss(c, target.i, target.j)
    if target.kind == "ser" and target.i is not None:
        return _point_loss(c, target.i)
    if target.kind == "ser":
        return _ser_loss(c)
    if target.kind == "ber":
        return _ber_loss(c)
    raise UsageError(f"unknown target kind {target.kind!r}")


def pep_d2_snr_mc(c, i, j, gamma, samples, seed) -> CurvatureEstimate:
    return curvature_mc(c, _pair_loss(c, i, j), "snr", gamma, samples, seed)


def pep_d2_noise_mc(c, i, j, noise_power, samples, seed) -> CurvatureEstimate:
    return curvature_mc(c, _pair_loss(c, i, j), "noise_power", noise_power, samples, seed)


def ser_point_d2_snr_mc(c, i, gamma, samples, seed) -> CurvatureEstimate:
    return curvature_mc(c, _point_loss(c, i), "snr", gamma, samples, seed)


def ser_point_d2_noise_mc(c, i, noise_power, samples, seed) -> CurvatureEstimate:
    return curvature_mc(c, _point_loss(c, i), "noise_power", noise_power, samples, seed)


def ser_d2_snr_mc(c, gamma, samples, seed) -> CurvatureEstimate:
    return curvature_mc(c, _ser_loss(c), "snr", gamma, samples, seed)


def ser_d2_noise_mc(c, noise_power, samples, seed) -> CurvatureEstimate:
    return curvature_mc(c, _ser_loss(c), "noise_power", noise_power, samples, seed)


def ber_d2_snr_mc(c, gamma, samples, seed) -> CurvatureEstimate:
    return curvature_mc(c, _ber_loss(c), "snr", gamma, samples, seed)


def ber_d2_noise_mc(c, noise_power, samples, seed) -> CurvatureEstimate:
    return curvature_mc(c, _ber_loss(c), "noise_power", noise_power, samples, seed)


CurvatureMetric = Callable[[float, int, int], CurvatureEstimate]


def curvature_metric(c: Constellation, target: Target, axis: str) -> CurvatureMetric:
    """Curvature of `target` as a function of (axis value, samples, seed)."""
    losses = target_loss(c, target)

    def _metric(value: float, samples: int, seed: int) -> CurvatureEstimate:
        return curvature_mc(c, losses, axis, value, samples, seed)

    return _metric


# -----------------------------
# Finite differences
# -----------------------------
def default_step(at: float) -> float:
    return max(1e-3 * at, 1e-4)


def finite_diff_d2(
    metric: Callable[[float, int], Union[float, Estimate]],
    at: float,
    h: Optional[float] = None,
    seed: int = 0,
    axis: str = "snr",
) -> CurvatureEstimate:
    """
    Central second difference of metric(value, seed) at `at`.

    The same seed is passed at all three points (common random numbers).
    A float-valued metric is treated as exact; for Estimates the error is
    propagated as √(se₊² + 4se₀² + se₋²)/h².
    """
    h = default_step(at) if h is None else h
    if h <= 0:
        raise PreconditionError(f"step must be positive, got {h}")
    if at - h <= 0:
        raise PreconditionError(f"evaluation points must be positive: at - h = {at - h}")

    vals = []
    errs = []
    samples = 0
    for v in (at + h, at, at - h):
        out = metric(v, seed)
        if isinstance(out, Estimate):
            vals.append(out.mean)
            errs.append(out.std_err)
            samples = out.samples
        else:
            vals.append(float(out))
            errs.append(0.0)

    value = (vals[0] - 2.0 * vals[1] + vals[2]) / (h * h)
    std_err = math.sqrt(errs[0] ** 2 + 4.0 * errs[1] ** 2 + errs[2] ** 2) / (h * h)
    return CurvatureEstimate(value=value, std_err=std_err, samples=samples, axis=axis, at=at, seed=seed)


# -----------------------------
# Closed-form oracles
# -----------------------------
def _q_sqrt_derivs(g: float) -> Tuple[float, float, float]:
    """q(g) = Q(√g) and its first two derivatives in g."""
    r = math.sqrt(g)
    phi = float(norm.pdf(r))
    return (
        q_function(r),
        -phi / (2.0 * r),
        phi * (1.0 / (4.0 * r) + 1.0 / (4.0 * g * r)),
    )


def _bpsk_derivs(gamma: float) -> Tuple[float, float]:
    _, d1, d2 = _q_sqrt_derivs(gamma)
    return d1, d2


def _qpsk_derivs(gamma: float) -> Tuple[float, float]:
    # P = 2u - u² with u = q(γ/2)
    u, q1, q2 = _q_sqrt_derivs(gamma / 2.0)
    u1, u2 = q1 / 2.0, q2 / 4.0
    return 2.0 * u1 * (1.0 - u), 2.0 * u2 * (1.0 - u) - 2.0 * u1 * u1


SER_DERIVS: Dict[str, Callable[[float], Tuple[float, float]]] = {
    "bpsk": _bpsk_derivs,
    "qpsk": _qpsk_derivs,
}


def _derivs(kind: str, gamma: float) -> Tuple[float, float]:
    fn = SER_DERIVS.get(kind)
    if fn is None:
        raise ValidationError(f"no curvature oracle for {kind!r}; known: {sorted(SER_DERIVS)}")
    if gamma <= 0:
        raise PreconditionError(f"SNR must be positive, got {gamma}")
    return fn(gamma)


def oracle_d2_snr(kind: str, gamma: float) -> float:
    return _derivs(kind, gamma)[1]


def oracle_d2_noise(kind: str, noise_power: float) -> float:
    """d²/dP_N² of the SER through γ = 1/P_N: F''·γ⁴ + 2F'·γ³."""
    if noise_power <= 0:
        raise PreconditionError(f"noise power must be positive, got {noise_power}")
    gamma = 1.0 / noise_power
    d1, d2 = _derivs(kind, gamma)
    return d2 * gamma**4 + 2.0 * d1 * gamma**3
