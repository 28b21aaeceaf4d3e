"""
Constellations: point sets with priors and optional bit labels.

Codes under ML decoding are handled as extended constellations (one point per
codeword), so everything downstream only ever sees a Constellation.

Public API:
- Constellation, BitMapping, ChannelParams
- normalize(points, ...)
- build_standard(kind, *args), parse_builtin(spec), BUILDERS
- hamming_matrix(c)
- load(path), save(c, path), export_csv(c, path)
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial.distance import pdist

from atlas.errors import (
    DegenerateInputError,
    MissingLabelsError,
    PreconditionError,
    ValidationError,
)
from utils.logger import get_logger

logger = get_logger(__name__)

DUPLICATE_TOL = 1e-12
PRIOR_TOL = 1e-12
ENERGY_TOL = 1e-9

PathLike = Union[str, Path]


# -----------------------------
# Types
# -----------------------------
@dataclass(frozen=True, eq=False)
class Constellation:
    name: str
    points: np.ndarray
    priors: Optional[np.ndarray] = None
    labels: Optional[Tuple[str, ...]] = None

    def __post_init__(self) -> None:
        points = np.array(self.points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        if points.ndim != 2 or points.shape[1] < 1:
            raise ValidationError(f"points must be an M×n matrix, got shape {points.shape}")
        if not np.all(np.isfinite(points)):
            raise ValidationError("points must be finite")

        size = points.shape[0]
        if size < 2:
            raise ValidationError(f"a constellation needs M >= 2 points, got {size}")

        dists = pdist(points)
        if dists.size and dists.min() < DUPLICATE_TOL:
            raise ValidationError("duplicate points (closer than 1e-12)")

        if self.priors is None:
            priors = np.full(size, 1.0 / size)
        else:
            priors = np.array(self.priors, dtype=float).reshape(-1)
        if priors.shape != (size,):
            raise ValidationError(f"expected {size} priors, got {priors.shape[0]}")
        if np.any(priors < 0) or not np.all(np.isfinite(priors)):
            raise ValidationError("priors must be finite and non-negative")
        if abs(priors.sum() - 1.0) > PRIOR_TOL:
            raise ValidationError(f"priors sum to {priors.sum():.15g}, expected 1")

        labels = None
        if self.labels is not None:
            labels = tuple(str(lab) for lab in self.labels)
            _validate_labels(labels, size)

        points.setflags(write=False)
        priors.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "priors", priors)
        object.__setattr__(self, "labels", labels)

    @property
    def size(self) -> int:
        return int(self.points.shape[0])

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])

    @property
    def energy(self) -> float:
        return float(np.mean(np.sum(self.points**2, axis=1)))

    @property
    def is_normalized(self) -> bool:
        return abs(self.energy - 1.0) <= ENERGY_TOL

    def normalized(self) -> "Constellation":
        return normalize(self.points, name=self.name, priors=self.priors, labels=self.labels)

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {
            "name": self.name,
            "dim": self.dim,
            "points": self.points.tolist(),
            "priors": self.priors.tolist(),
        }
        if self.labels is not None:
            out["labels"] = list(self.labels)
        return out

    def __repr__(self) -> str:
        return f"Constellation({self.name!r}, M={self.size}, n={self.dim})"


@dataclass(frozen=True)
class BitMapping:
    hamming: np.ndarray
    bits_per_symbol: int

    @property
    def max_distance(self) -> int:
        return int(self.hamming.max())


@dataclass(frozen=True)
class ChannelParams:
    """AWGN with noise power σ₀² per dimension; snr = 1/σ₀² is the same scalar."""

    noise_power: float
    snr: float = field(init=False)

    def __post_init__(self) -> None:
        if not (self.noise_power > 0) or not math.isfinite(self.noise_power):
            raise PreconditionError(f"noise power must be positive, got {self.noise_power}")
        object.__setattr__(self, "snr", 1.0 / self.noise_power)

    @classmethod
    def from_snr(cls, snr: float) -> "ChannelParams":
        if not (snr > 0) or not math.isfinite(snr):
            raise PreconditionError(f"SNR must be positive, got {snr}")
        return cls(noise_power=1.0 / snr)

    @classmethod
    def from_noise_power(cls, noise_power: float) -> "ChannelParams":
        return cls(noise_power=noise_power)

    @property
    def sigma(self) -> float:
        return math.sqrt(self.noise_power)


def _validate_labels(labels: Sequence[str], size: int) -> None:
    if len(labels) != size:
        raise ValidationError(f"expected {size} labels, got {len(labels)}")
    lengths = {len(lab) for lab in labels}
    if len(lengths) != 1:
        raise ValidationError("labels must all have the same bit length")
    length = lengths.pop()
    if length < 1 or any(set(lab) - {"0", "1"} for lab in labels):
        raise ValidationError("labels must be non-empty bit strings")
    if len(set(labels)) != size:
        raise ValidationError("labels must be distinct")
    if 2**length < size:
        raise ValidationError(f"{length}-bit labels cannot address {size} points")


# -----------------------------
# Normalisation
# -----------------------------
def normalize(
    points: Any,
    *,
    name: str = "custom",
    priors: Optional[Sequence[float]] = None,
    labels: Optional[Sequence[str]] = None,
) -> Constellation:
    """Scale points by one positive factor so that (1/M)·Σ|s_i|² = 1."""
    arr = np.array(points, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] < 2:
        raise ValidationError(f"need an M×n matrix with M >= 2, got shape {arr.shape}")

    energy = float(np.mean(np.sum(arr**2, axis=1)))
    if energy == 0.0:
        raise DegenerateInputError("all points are at the origin; cannot normalise")

    # already unit energy: keep the points untouched so normalisation is idempotent
    scale = 1.0 if abs(energy - 1.0) <= PRIOR_TOL else 1.0 / math.sqrt(energy)
    return Constellation(
        name=name,
        points=arr * scale,
        priors=None if priors is None else np.asarray(priors, dtype=float),
        labels=None if labels is None else tuple(labels),
    )


# -----------------------------
# Builders
# -----------------------------
def _gray(k: int) -> int:
    return k ^ (k >> 1)


def _bits(value: int, width: int) -> str:
    return format(value, f"0{width}b")


def _index_labels(size: int) -> Tuple[str, ...]:
    width = max(1, math.ceil(math.log2(size)))
    return tuple(_bits(k, width) for k in range(size))


def _is_power_of_two(m: int) -> bool:
    return m >= 1 and (m & (m - 1)) == 0


def bpsk() -> Constellation:
    return normalize([[1.0], [-1.0]], name="bpsk", labels=("0", "1"))


def mpsk(size: int) -> Constellation:
    if size < 2 or not _is_power_of_two(size):
        raise ValidationError(f"unsupported M={size} for PSK (need a power of 2)")
    width = int(math.log2(size))
    angles = 2.0 * np.pi * np.arange(size) / size
    points = np.column_stack([np.cos(angles), np.sin(angles)])
    labels = tuple(_bits(_gray(k), width) for k in range(size))
    return normalize(points, name=f"psk{size}", labels=labels)


def qam(size: int) -> Constellation:
    side = math.isqrt(size)
    if size < 4 or side * side != size or not _is_power_of_two(side):
        raise ValidationError(
            f"unsupported M={size} for square Gray QAM (need M = 4^k)"
        )
    half = int(math.log2(side))
    levels = np.arange(-(side - 1), side, 2, dtype=float)

    points: List[Tuple[float, float]] = []
    labels: List[str] = []
    for ix in range(side):
        for iy in range(side):
            points.append((levels[ix], levels[iy]))
            labels.append(_bits(_gray(ix), half) + _bits(_gray(iy), half))

    name = "qpsk" if size == 4 else f"qam{size}"
    return normalize(points, name=name, labels=labels)


def grid(side: int, dim: int) -> Constellation:
    if side < 2 or dim < 1:
        raise ValidationError(f"grid needs side >= 2 and n >= 1, got side={side}, n={dim}")
    levels = np.arange(side, dtype=float) - (side - 1) / 2.0
    points = np.array(list(itertools.product(levels, repeat=dim)))
    return normalize(
        points,
        name=f"grid{'x'.join([str(side)] * dim)}",
        labels=_index_labels(points.shape[0]),
    )


def hypercube(dim: int) -> Constellation:
    if dim < 1:
        raise ValidationError(f"hypercube needs n >= 1, got {dim}")
    points = np.array(list(itertools.product((-1.0, 1.0), repeat=dim)))
    return normalize(points, name=f"hypercube{dim}", labels=_index_labels(points.shape[0]))


def random_spherical(size: int, dim: int, seed: int = 0) -> Constellation:
    """M codewords drawn uniformly on the unit sphere in n dimensions."""
    if size < 2 or dim < 1:
        raise ValidationError(f"random spherical code needs M >= 2 and n >= 1, got M={size}, n={dim}")
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((size, dim))
    points = raw / np.linalg.norm(raw, axis=1, keepdims=True)
    return normalize(
        points,
        name=f"spherical{size}x{dim}s{seed}",
        labels=_index_labels(size),
    )


# -----------------------------
# Builder registry (serializable names)
# -----------------------------
BUILDERS: Dict[str, Callable[..., Constellation]] = {
    "bpsk": bpsk,
    "mpsk": mpsk,
    "qam": qam,
    "grid": grid,
    "hypercube": hypercube,
    "random_spherical": random_spherical,
}

ALIASES: Dict[str, Tuple[str, Tuple[int, ...]]] = {
    "qpsk": ("qam", (4,)),
    "psk": ("mpsk", ()),
    "spherical": ("random_spherical", ()),
}

_TRAILING = re.compile(r"([a-z_]+?)(\d+)")
_GRID = re.compile(r"grid(\d+)((?:x\d+)*)")


def build_standard(kind: str, *args: int) -> Constellation:
    builder = BUILDERS.get(kind)
    if builder is None:
        raise ValidationError(
            f"unknown constellation kind {kind!r}; known: {', '.join(sorted(BUILDERS))}"
        )
    return builder(*args)


def parse_builtin(spec: str) -> Constellation:
    """
    Build a constellation from a compact name.

    Accepted forms: "bpsk", "qpsk", "qam16", "psk8", "hypercube4",
    "grid3x3x3", or colon form "kind:arg:arg", e.g. "random_spherical:16:8:7".
    """
    text = spec.strip().lower()
    head, *rest = text.split(":")
    try:
        args = tuple(int(a) for a in rest)
    except ValueError:
        raise ValidationError(f"builtin arguments must be integers: {spec!r}")

    if head in ALIASES:
        kind, fixed = ALIASES[head]
        return build_standard(kind, *(fixed + args))
    if head in BUILDERS:
        return build_standard(head, *args)

    m = _GRID.fullmatch(head)
    if m and not args:
        sides = [int(m.group(1))] + [int(s) for s in m.group(2).split("x") if s]
        if len(set(sides)) != 1:
            raise ValidationError(f"only cubic grids are supported: {spec!r}")
        return grid(sides[0], len(sides))

    m = _TRAILING.fullmatch(head)
    if m and not args:
        prefix, number = m.group(1), int(m.group(2))
        kind, fixed = ALIASES.get(prefix, (prefix, ()))
        if kind in BUILDERS:
            return build_standard(kind, *(fixed + (number,)))

    raise ValidationError(f"unknown builtin constellation {spec!r}")


# -----------------------------
# Bit mapping
# -----------------------------
def hamming_matrix(c: Constellation) -> BitMapping:
    """Label Hamming distances; BER divides by ⌈log₂M⌉ whatever the label length."""
    if c.labels is None:
        raise MissingLabelsError(f"constellation {c.name!r} has no bit labels")
    bits = np.array([[ch == "1" for ch in lab] for lab in c.labels], dtype=np.int8)
    hamming = np.sum(bits[:, None, :] != bits[None, :, :], axis=2).astype(np.int64)
    hamming.setflags(write=False)
    return BitMapping(hamming=hamming, bits_per_symbol=(c.size - 1).bit_length())


# -----------------------------
# Persistence
# -----------------------------
def _schema_error(path: PathLike, msg: str) -> ValidationError:
    return ValidationError(f"{path}: {msg}")


def from_dict(data: Any, *, source: str = "<dict>", auto_normalize: bool = False) -> Constellation:
    if not isinstance(data, dict):
        raise _schema_error(source, "top level must be a JSON object")

    unknown = set(data) - {"name", "dim", "points", "priors", "labels"}
    if unknown:
        raise _schema_error(source, f"unknown keys {sorted(unknown)}")

    name = data.get("name")
    dim = data.get("dim")
    points = data.get("points")
    if not isinstance(name, str):
        raise _schema_error(source, "'name' must be a string")
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        raise _schema_error(source, "'dim' must be a positive integer")
    if not isinstance(points, list) or not all(isinstance(p, list) for p in points):
        raise _schema_error(source, "'points' must be a list of coordinate lists")
    for row in points:
        if len(row) != dim:
            raise _schema_error(source, f"point {row} does not have dim={dim} coordinates")
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in row):
            raise _schema_error(source, "coordinates must be numbers")

    priors = data.get("priors")
    if priors is not None and (
        not isinstance(priors, list)
        or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in priors)
    ):
        raise _schema_error(source, "'priors' must be a list of numbers")

    labels = data.get("labels")
    if labels is not None and (
        not isinstance(labels, list) or not all(isinstance(v, str) for v in labels)
    ):
        raise _schema_error(source, "'labels' must be a list of bit strings")

    c = Constellation(
        name=name,
        points=np.array(points, dtype=float).reshape(len(points), dim),
        priors=priors,
        labels=None if labels is None else tuple(labels),
    )

    if not c.is_normalized:
        if not auto_normalize:
            raise _schema_error(
                source,
                f"average energy is {c.energy:.12g}, expected 1 (load with auto_normalize)",
            )
        logger.warning(
            "[constellation] %s: average energy %.6g, normalising on load", source, c.energy
        )
        c = c.normalized()
    return c


def load(path: PathLike, *, auto_normalize: bool = False) -> Constellation:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise _schema_error(path, f"invalid JSON: {e}")
    return from_dict(data, source=str(path), auto_normalize=auto_normalize)


def save(c: Constellation, path: PathLike) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(c.to_dict(), f, indent=2)
        f.write("\n")
    logger.info("[constellation] wrote %s to %s", c.name, path)


def export_csv(c: Constellation, path: PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow([f"x{k}" for k in range(c.dim)] + ["label"])
        for idx, row in enumerate(c.points):
            label = c.labels[idx] if c.labels is not None else ""
            writer.writerow([repr(float(v)) for v in row] + [label])
