"""
Decision regions of the minimum-distance detector as half-space systems.

A region is {x : A x <= b} written in the frame of some constellation point
(that point sits at the origin). Rows of A are unit vectors, so b_k is the
distance from the origin to hyperplane k and d_min = min_k b_k is exact even
when rows are redundant.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Any, Dict, Iterator, List, Optional, Tuple

import numpy as np
from scipy.optimize import linprog

from atlas.constellation import Constellation
from atlas.errors import PreconditionError, TooLargeError, ValidationError
from utils.logger import get_logger

logger = get_logger(__name__)

FEASIBILITY_TOL = 1e-9
UNIT_ROW_TOL = 1e-12
MAX_SUBSETS = 10_000_000
CHUNK = 4096
COND_LIMIT = 1e10


@dataclass(frozen=True, eq=False)
class HalfspaceRegion:
    owner: int
    frame: int
    rows: np.ndarray
    offsets: np.ndarray
    neighbors: Tuple[int, ...]

    def __post_init__(self) -> None:
        norms = np.linalg.norm(self.rows, axis=1)
        if np.any(np.abs(norms - 1.0) > UNIT_ROW_TOL):
            raise ValidationError("half-space rows must have unit norm")
        if self.rows.shape[0] != self.offsets.shape[0]:
            raise ValidationError("rows and offsets disagree in length")
        self.rows.setflags(write=False)
        self.offsets.setflags(write=False)

    @property
    def dim(self) -> int:
        return int(self.rows.shape[1])


@dataclass(frozen=True)
class RegionExtents:
    d_min: float
    d_max: float
    bounded: bool


def _check_index(c: Constellation, i: int) -> None:
    if not 0 <= i < c.size:
        raise PreconditionError(f"point index {i} outside 0..{c.size - 1}")


# -----------------------------
# Region construction
# -----------------------------
def voronoi_region(c: Constellation, i: int) -> HalfspaceRegion:
    """Ω_i in the frame of s_i: rows (s_j - s_i)/|s_j - s_i|, offsets |s_j - s_i|/2."""
    _check_index(c, i)
    others = tuple(j for j in range(c.size) if j != i)
    diff = c.points[list(others)] - c.points[i]
    dist = np.linalg.norm(diff, axis=1)
    return HalfspaceRegion(
        owner=i,
        frame=i,
        rows=diff / dist[:, None],
        offsets=dist / 2.0,
        neighbors=others,
    )


def pep_region(c: Constellation, i: int, j: int) -> HalfspaceRegion:
    """Ω_j translated so that s_i sits at the origin."""
    _check_index(c, i)
    _check_index(c, j)
    if i == j:
        raise PreconditionError("pairwise region needs i != j")
    own = voronoi_region(c, j)
    shift = c.points[j] - c.points[i]
    return HalfspaceRegion(
        owner=j,
        frame=i,
        rows=own.rows.copy(),
        offsets=own.offsets + own.rows @ shift,
        neighbors=own.neighbors,
    )


def pair_distance(c: Constellation, i: int, j: int) -> float:
    _check_index(c, i)
    _check_index(c, j)
    if i == j:
        raise PreconditionError("pair distance needs i != j")
    return float(np.linalg.norm(c.points[i] - c.points[j]))


def contains(region: HalfspaceRegion, x: Any, tol: float = FEASIBILITY_TOL) -> Any:
    """Membership test; x may be one point (n,) or a batch (k, n)."""
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    inside = np.all(pts @ region.rows.T <= region.offsets + tol, axis=1)
    return bool(inside[0]) if single else inside


def contains_ball(region: HalfspaceRegion, radius: float) -> bool:
    """Ball of `radius` around the frame origin lies in the region (boundary counts)."""
    if radius < 0:
        raise PreconditionError(f"radius must be >= 0, got {radius}")
    return bool(radius <= region.offsets.min())


# -----------------------------
# Boundedness (recession cone)
# -----------------------------
def recession_direction(region: HalfspaceRegion) -> Optional[np.ndarray]:
    """
    Return a nonzero d with A d <= 0 if one exists, else None.

    First LP: max t s.t. A d <= -t, |d_k| <= 1. A positive optimum gives a
    direction strictly inside the cone. When t* = 0 the cone may still hold a
    ray on its boundary, so each coordinate is probed in both signs.
    """
    A = region.rows
    m, n = A.shape

    res = linprog(
        c=np.r_[np.zeros(n), -1.0],
        A_ub=np.hstack([A, np.ones((m, 1))]),
        b_ub=np.zeros(m),
        bounds=[(-1.0, 1.0)] * n + [(None, 1.0)],
        method="highs",
    )
    if res.status != 0:
        raise ValidationError(f"recession LP failed: {res.message}")
    if -res.fun > FEASIBILITY_TOL:
        return np.asarray(res.x[:n])

    for k in range(n):
        for sign in (1.0, -1.0):
            cost = np.zeros(n)
            cost[k] = -sign
            res = linprog(
                c=cost,
                A_ub=A,
                b_ub=np.zeros(m),
                bounds=[(-1.0, 1.0)] * n,
                method="highs",
            )
            if res.status == 0 and -res.fun > FEASIBILITY_TOL:
                return np.asarray(res.x)
    return None


def is_bounded(region: HalfspaceRegion) -> bool:
    return recession_direction(region) is None


# -----------------------------
# Vertex enumeration
# -----------------------------
def _chunks(m: int, n: int) -> Iterator[np.ndarray]:
    combos = itertools.combinations(range(m), n)
    while True:
        chunk = list(itertools.islice(combos, CHUNK))
        if not chunk:
            return
        yield np.array(chunk, dtype=np.int64)


def vertices(region: HalfspaceRegion) -> np.ndarray:
    """
    All vertices of the polyhedron by exhaustive n-subset enumeration.

    Rank-deficient subsets are skipped; candidates are kept when they satisfy
    every row within FEASIBILITY_TOL.
    """
    A, b = region.rows, region.offsets
    m, n = A.shape
    total = math.comb(m, n)
    if total > MAX_SUBSETS:
        raise TooLargeError(
            f"vertex enumeration needs C({m},{n}) = {total} solves (limit {MAX_SUBSETS})"
        )

    found: List[np.ndarray] = []
    for idx in _chunks(m, n):
        sub_a = A[idx]
        sub_b = b[idx]
        ok = np.linalg.cond(sub_a) < COND_LIMIT
        if not np.any(ok):
            continue
        sol = np.linalg.solve(sub_a[ok], sub_b[ok][..., None])[..., 0]
        feasible = np.all(sol @ A.T <= b + FEASIBILITY_TOL, axis=1)
        if np.any(feasible):
            found.append(sol[feasible])

    logger.debug("[geometry] region %d: %d subsets enumerated", region.owner, total)
    if not found:
        return np.zeros((0, n))
    pts = np.vstack(found)
    _, keep = np.unique(np.round(pts, 9), axis=0, return_index=True)
    return pts[np.sort(keep)]


def extents(region: HalfspaceRegion) -> RegionExtents:
    if region.frame != region.owner:
        raise PreconditionError("extents are defined for a region in its owner's frame")
    d_min = float(region.offsets.min())
    if not is_bounded(region):
        return RegionExtents(d_min=d_min, d_max=math.inf, bounded=False)

    verts = vertices(region)
    if verts.shape[0] == 0:
        raise ValidationError(f"bounded region {region.owner} produced no vertices")
    d_max = float(np.linalg.norm(verts, axis=1).max())
    return RegionExtents(d_min=d_min, d_max=d_max, bounded=True)


def point_extents(c: Constellation) -> List[RegionExtents]:
    out = [extents(voronoi_region(c, i)) for i in range(c.size)]
    bounded = sum(e.bounded for e in out)
    logger.info("[geometry] %s: %d/%d bounded regions", c.name, bounded, c.size)
    return out


# -----------------------------
# Sampling inside a region
# -----------------------------
def chebyshev_center(region: HalfspaceRegion, box: float) -> Tuple[np.ndarray, float]:
    """Largest inscribed ball, searched inside the box |x_k| <= box."""
    A, b = region.rows, region.offsets
    m, n = A.shape
    res = linprog(
        c=np.r_[np.zeros(n), -1.0],
        A_ub=np.hstack([A, np.ones((m, 1))]),
        b_ub=b,
        bounds=[(-box, box)] * n + [(0.0, box)],
        method="highs",
    )
    if res.status != 0 or res.x[n] <= 0:
        raise ValidationError(f"region {region.owner} has empty interior")
    return np.asarray(res.x[:n]), float(res.x[n])


def sample_region(
    region: HalfspaceRegion,
    count: int,
    seed: int = 0,
    max_rounds: int = 1000,
) -> np.ndarray:
    """
    Rejection-sample `count` points of the region.

    Bounded regions: uniform proposals over the vertex bounding box.
    Unbounded regions: Gaussian proposals around the Chebyshev center.
    """
    rng = np.random.default_rng(seed)
    n = region.dim
    bounded = is_bounded(region)
    if bounded:
        verts = vertices(region)
        lo, hi = verts.min(axis=0), verts.max(axis=0)

        def propose(k: int) -> np.ndarray:
            return rng.uniform(lo, hi, size=(k, n))

    else:
        box = 10.0 * (float(np.abs(region.offsets).max()) + 1.0)
        center, radius = chebyshev_center(region, box)
        spread = 2.0 * max(radius, 1e-3)

        def propose(k: int) -> np.ndarray:
            return center + spread * rng.standard_normal((k, n))

    kept: List[np.ndarray] = []
    have = 0
    for _ in range(max_rounds):
        cand = propose(max(4 * count, 256))
        cand = cand[contains(region, cand, tol=0.0)]
        kept.append(cand)
        have += cand.shape[0]
        if have >= count:
            return np.vstack(kept)[:count]
    raise ValidationError(f"rejection sampling collected only {have} of {count} points")


def region_to_dict(region: HalfspaceRegion) -> Dict[str, Any]:
    return {
        "owner": region.owner,
        "frame": region.frame,
        "rows": region.rows.tolist(),
        "offsets": region.offsets.tolist(),
    }
