"""
Convexity thresholds, interval classification, inflection scans and the
sphere-hardening / time-sharing probes built on top of them.

Every threshold is a rule: a named inequality on the axis value that, when
it holds, certifies a verdict (convex or concave) for one target. Thresholds
that cannot apply are kept with value None and the reason, so reports can say
why a region is missing instead of dropping it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import chi2

from atlas.constellation import Constellation
from atlas.curvature import (
    CurvatureConstants,
    CurvatureEstimate,
    curvature_metric,
)
from atlas.error_engine import (
    Estimate,
    Target,
    channel_at,
    metric_for,
    ser_avg_mc,
)
from atlas.errors import PreconditionError, UsageError
from atlas.geometry import RegionExtents, contains_ball, point_extents, voronoi_region
from atlas.sampling import accumulate, chi_square
from utils.logger import get_logger

logger = get_logger(__name__)

CONVEX = "convex"
CONCAVE = "concave"
INDETERMINATE = "indeterminate"
PRINTED_CLAIM = "convex (printed claim)"

MIN_CONFIDENT = 20


# -----------------------------
# Thresholds
# -----------------------------
@dataclass(frozen=True)
class Threshold:
    """
    rule holds for value >= threshold ("above") or value <= threshold ("below").

    certified=False marks a claim that is reported but not backed by the sign
    argument (the low-SNR PEP bound with α1 for n > 2).
    """

    rule: str
    axis: str
    direction: str
    verdict: str
    formula: str
    value: Optional[float]
    reason: Optional[str] = None
    vacuous: bool = False
    certified: bool = True

    @property
    def applies(self) -> bool:
        return self.value is not None

    def holds(self, x: float) -> bool:
        if self.value is None:
            return False
        return x >= self.value if self.direction == "above" else x <= self.value

    def describe(self) -> str:
        sym = "γ" if self.axis == "snr" else "P_N"
        op = ">=" if self.direction == "above" else "<="
        if self.vacuous:
            return f"{self.rule}: vacuous, {sym} {op} {self.formula} ({self.reason})"
        if self.value is None:
            return f"{self.rule}: {sym} {op} {self.formula} not applicable ({self.reason})"
        if math.isinf(self.value):
            return f"{self.rule}: {self.verdict} for every {sym} > 0"
        return f"{self.rule}: {self.verdict} for {sym} {op} {self.formula} = {self.value:.6g}"

    def to_dict(self) -> Dict[str, object]:
        value: object = self.value
        if self.value is not None and math.isinf(self.value):
            value = "inf"
        return {
            "rule": self.rule,
            "axis": self.axis,
            "direction": self.direction,
            "verdict": self.verdict,
            "formula": self.formula,
            "value": value,
            "reason": self.reason,
            "vacuous": self.vacuous,
            "certified": self.certified,
        }


def _absent(rule, axis, direction, verdict, formula, reason, vacuous=False, certified=True):
    return Threshold(
        rule=rule,
        axis=axis,
        direction=direction,
        verdict=verdict,
        formula=formula,
        value=None,
        reason=reason,
        vacuous=vacuous,
        certified=certified,
    )


@dataclass(frozen=True)
class PointThresholds:
    index: int
    snr_high: Threshold
    snr_low: Threshold
    noise_small: Threshold
    noise_large: Threshold


@dataclass(frozen=True)
class PairThresholds:
    i: int
    j: int
    d_ij: float
    snr_high: Threshold
    snr_low_printed: Threshold
    snr_low_derived: Threshold
    noise_small: Threshold
    noise_large: Threshold


@dataclass(frozen=True, eq=False)
class ThresholdSet:
    constellation: Constellation
    constants: CurvatureConstants
    extents: Tuple[RegionExtents, ...]
    d_min: float
    points: Tuple[PointThresholds, ...]
    ser_snr_high: Threshold
    ser_noise_small: Threshold
    ber_snr_high: Threshold
    ber_noise_small: Threshold

    @property
    def n(self) -> int:
        return self.constants.n

    def pair(self, i: int, j: int) -> PairThresholds:
        return _pair_thresholds(self, i, j)

    def pairs(self) -> List[PairThresholds]:
        m = self.constellation.size
        return [self.pair(i, j) for i in range(m) for j in range(m) if i != j]

    def rules(self, target: Target, axis: str) -> List[Threshold]:
        """Thresholds governing `target` on `axis`, certified ones first."""
        n = self.n
        if axis == "snr":
            if target.kind == "ser" and target.i is None:
                return [_low_dim("ser.snr.low-dim", n), self.ser_snr_high]
            if target.kind == "ser":
                pt = self._point(target.i)
                return [_low_dim("ser_i.snr.low-dim", n), pt.snr_high, pt.snr_low]
            if target.kind == "pep":
                pr = self.pair(target.i, target.j)
                return [pr.snr_high, pr.snr_low_derived, pr.snr_low_printed]
            if target.kind == "ber":
                return [self.ber_snr_high]
        elif axis == "noise_power":
            if target.kind == "ser" and target.i is None:
                return [self.ser_noise_small]
            if target.kind == "ser":
                pt = self._point(target.i)
                return [pt.noise_small, pt.noise_large]
            if target.kind == "pep":
                pr = self.pair(target.i, target.j)
                return [pr.noise_small, pr.noise_large]
            if target.kind == "ber":
                return [self.ber_noise_small]
        else:
            raise UsageError(f"unknown axis {axis!r}")
        raise UsageError(f"unknown target {target}")

    def _point(self, i: Optional[int]) -> PointThresholds:
        if i is None or not 0 <= i < len(self.points):
            raise PreconditionError(f"point index {i} outside 0..{len(self.points) - 1}")
        return self.points[i]

    def to_dict(self, include_pairs: bool = True) -> Dict[str, object]:
        out: Dict[str, object] = {
            "constellation": self.constellation.name,
            "n": self.n,
            "constants": {
                "alpha1": self.constants.alpha1,
                "alpha2": self.constants.alpha2,
                "beta1": self.constants.beta1,
                "beta2": self.constants.beta2,
            },
            "d_min": self.d_min,
            "per_point": [
                {
                    "index": p.index,
                    "snr_high": p.snr_high.to_dict(),
                    "snr_low": p.snr_low.to_dict(),
                    "noise_small": p.noise_small.to_dict(),
                    "noise_large": p.noise_large.to_dict(),
                }
                for p in self.points
            ],
            "ser_snr_high": self.ser_snr_high.to_dict(),
            "ser_noise_small": self.ser_noise_small.to_dict(),
            "ber_snr_high": self.ber_snr_high.to_dict(),
            "ber_noise_small": self.ber_noise_small.to_dict(),
        }
        if include_pairs:
            out["pairs"] = [
                {
                    "i": p.i,
                    "j": p.j,
                    "d_ij": p.d_ij,
                    "snr_high": p.snr_high.to_dict(),
                    "snr_low_printed": p.snr_low_printed.to_dict(),
                    "snr_low_derived": p.snr_low_derived.to_dict(),
                    "noise_small": p.noise_small.to_dict(),
                    "noise_large": p.noise_large.to_dict(),
                }
                for p in self.pairs()
            ]
        return out


def _low_dim(rule: str, n: int) -> Threshold:
    if n <= 2:
        return Threshold(rule, "snr", "below", CONVEX, "∞ (n <= 2)", math.inf)
    return _absent(rule, "snr", "below", CONVEX, "∞ (n <= 2)", f"n = {n} > 2")


def _point_thresholds(k: CurvatureConstants, i: int, ext: RegionExtents) -> PointThresholds:
    snr_high = Threshold(
        "ser_i.snr.high", "snr", "above", CONVEX, "(n+√(2n))/d_min,i²", k.alpha1 / ext.d_min**2
    )
    noise_small = Threshold(
        "ser_i.noise.small",
        "noise_power",
        "below",
        CONVEX,
        "d_min,i²/(n+2+√(2(n+2)))",
        ext.d_min**2 / k.beta1,
    )

    rule, formula = "ser_i.snr.low-concave", "(n-√(2n))/d_max,i²"
    if not ext.bounded:
        snr_low = _absent(rule, "snr", "below", CONCAVE, formula, "d_max,i = inf (unbounded region)", True)
    elif k.alpha2 <= 0:
        snr_low = _absent(rule, "snr", "below", CONCAVE, formula, f"n - √(2n) <= 0 for n = {k.n}")
    else:
        snr_low = Threshold(rule, "snr", "below", CONCAVE, formula, k.alpha2 / ext.d_max**2)

    rule, formula = "ser_i.noise.large-concave", "d_max,i²/(n+2-√(2(n+2)))"
    if ext.bounded:
        noise_large = Threshold(rule, "noise_power", "above", CONCAVE, formula, ext.d_max**2 / k.beta2)
    else:
        noise_large = _absent(
            rule, "noise_power", "above", CONCAVE, formula, "d_max,i = inf (unbounded region)", True
        )
    return PointThresholds(i, snr_high, snr_low, noise_small, noise_large)


def _pair_thresholds(ts: ThresholdSet, i: int, j: int) -> PairThresholds:
    c = ts.constellation
    for idx in (i, j):
        if not 0 <= idx < c.size:
            raise PreconditionError(f"point index {idx} outside 0..{c.size - 1}")
    if i == j:
        raise PreconditionError("pair thresholds need i != j")

    k = ts.constants
    ext_i, ext_j = ts.extents[i], ts.extents[j]
    d_ij = float(np.linalg.norm(c.points[i] - c.points[j]))
    reach = d_ij + ext_j.d_max

    snr_high = Threshold(
        "pep.snr.high", "snr", "above", CONVEX, "(n+√(2n))/d_min,i²", k.alpha1 / ext_i.d_min**2
    )
    noise_small = Threshold(
        "pep.noise.small",
        "noise_power",
        "below",
        CONVEX,
        "d_min,i²/(n+2+√(2(n+2)))",
        ext_i.d_min**2 / k.beta1,
    )

    unbounded = "d_max,j = inf (unbounded target region)"
    printed_formula = "(n+√(2n))/(d_ij+d_max,j)²"
    derived_formula = "(n-√(2n))/(d_ij+d_max,j)²"
    if k.n <= 2:
        # both factors of f change sign at α1/γ only; f <= 0 on Ω_j
        if ext_j.bounded:
            printed = Threshold(
                "pep.snr.low-concave", "snr", "below", CONCAVE, printed_formula, k.alpha1 / reach**2
            )
        else:
            printed = _absent("pep.snr.low-concave", "snr", "below", CONCAVE, printed_formula, unbounded, True)
        derived = _absent(
            "pep.snr.low-convex", "snr", "below", CONVEX, derived_formula, f"n - √(2n) <= 0 for n = {k.n}"
        )
    else:
        rule_p = "pep.snr.low-convex-printed"
        if ext_j.bounded:
            printed = Threshold(
                rule_p, "snr", "below", PRINTED_CLAIM, printed_formula, k.alpha1 / reach**2, certified=False
            )
            derived = Threshold(
                "pep.snr.low-convex", "snr", "below", CONVEX, derived_formula, k.alpha2 / reach**2
            )
        else:
            printed = _absent(rule_p, "snr", "below", PRINTED_CLAIM, printed_formula, unbounded, True, False)
            derived = _absent("pep.snr.low-convex", "snr", "below", CONVEX, derived_formula, unbounded, True)

    rule, formula = "pep.noise.large", "(d_ij+d_max,j)²/(n+2-√(2(n+2)))"
    if ext_j.bounded:
        noise_large = Threshold(rule, "noise_power", "above", CONVEX, formula, reach**2 / k.beta2)
    else:
        noise_large = _absent(rule, "noise_power", "above", CONVEX, formula, unbounded, True)

    return PairThresholds(i, j, d_ij, snr_high, printed, derived, noise_small, noise_large)


def thresholds(c: Constellation) -> ThresholdSet:
    k = CurvatureConstants.for_dim(c.dim)
    ext = tuple(point_extents(c))
    d_min = min(e.d_min for e in ext)
    points = tuple(_point_thresholds(k, i, e) for i, e in enumerate(ext))

    ts = ThresholdSet(
        constellation=c,
        constants=k,
        extents=ext,
        d_min=d_min,
        points=points,
        ser_snr_high=Threshold(
            "ser.snr.high", "snr", "above", CONVEX, "(n+√(2n))/d_min²", k.alpha1 / d_min**2
        ),
        ser_noise_small=Threshold(
            "ser.noise.small", "noise_power", "below", CONVEX, "d_min²/(n+2+√(2(n+2)))", d_min**2 / k.beta1
        ),
        ber_snr_high=Threshold(
            "ber.snr.high", "snr", "above", CONVEX, "(n+√(2n))/d_min²", k.alpha1 / d_min**2
        ),
        ber_noise_small=Threshold(
            "ber.noise.small", "noise_power", "below", CONVEX, "d_min²/(n+2+√(2(n+2)))", d_min**2 / k.beta1
        ),
    )
    logger.info(
        "[convexity] %s: d_min=%.6g ser_snr_high=%.6g", c.name, d_min, ts.ser_snr_high.value
    )
    return ts


# -----------------------------
# Classification and certified intervals
# -----------------------------
@dataclass(frozen=True)
class Classification:
    verdict: str
    rule: Optional[str] = None
    threshold: Optional[float] = None
    printed_claim: Optional[str] = None
    printed_rule: Optional[str] = None


def classify(
    c: Constellation,
    axis: str,
    target: Target,
    value: float,
    ts: Optional[ThresholdSet] = None,
) -> Classification:
    if value <= 0:
        raise PreconditionError(f"{axis} value must be positive, got {value}")
    ts = ts or thresholds(c)
    rules = ts.rules(target, axis)

    verdict = Classification(INDETERMINATE)
    for rule in rules:
        if rule.certified and rule.holds(value):
            verdict = Classification(rule.verdict, rule.rule, rule.value)
            break

    for rule in rules:
        if not rule.certified and rule.holds(value):
            return Classification(
                verdict.verdict,
                verdict.rule,
                verdict.threshold,
                printed_claim=rule.verdict,
                printed_rule=rule.rule,
            )
    return verdict


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    verdict: str
    source: str
    rule: Optional[str] = None
    note: Optional[str] = None

    def to_dict(self) -> Dict[str, object]:
        return {
            "lo": self.lo,
            "hi": "inf" if math.isinf(self.hi) else self.hi,
            "verdict": self.verdict,
            "source": self.source,
            "rule": self.rule,
            "note": self.note,
        }


def theorem_intervals(
    c: Constellation,
    target: Target,
    axis: str,
    ts: Optional[ThresholdSet] = None,
) -> List[Interval]:
    """Ordered partition of (0, ∞) into certified and indeterminate intervals."""
    ts = ts or thresholds(c)
    pieces: List[Interval] = []
    claims: List[Threshold] = []
    for rule in ts.rules(target, axis):
        if not rule.applies:
            continue
        if not rule.certified:
            claims.append(rule)
            continue
        lo, hi = (rule.value, math.inf) if rule.direction == "above" else (0.0, rule.value)
        pieces.append(Interval(lo, hi, rule.verdict, "theorem", rule.rule))

    pieces.sort(key=lambda p: (p.lo, p.hi))
    out: List[Interval] = []
    cursor = 0.0
    for p in pieces:
        lo = max(p.lo, cursor)
        if lo >= p.hi:
            continue
        if lo > cursor:
            out.append(Interval(cursor, lo, INDETERMINATE, "theorem"))
        out.append(Interval(lo, p.hi, p.verdict, p.source, p.rule))
        cursor = p.hi
    if cursor < math.inf:
        out.append(Interval(cursor, math.inf, INDETERMINATE, "theorem"))

    for claim in claims:
        out = [
            Interval(iv.lo, iv.hi, iv.verdict, iv.source, iv.rule, note=f"{claim.rule}: {claim.verdict}")
            if iv.verdict == INDETERMINATE and iv.lo < claim.value
            else iv
            for iv in out
        ]
    return out


def intermediate_band(
    c: Constellation,
    target: Target,
    axis: str,
    ts: Optional[ThresholdSet] = None,
) -> Optional[Tuple[float, float]]:
    """The gap between the low and high certified regions, when both exist."""
    ts = ts or thresholds(c)
    if target.kind == "pep":
        pr = ts.pair(target.i, target.j)
        if axis == "snr":
            # for n > 2 only the α2 bound certifies the low end
            low = pr.snr_low_printed if ts.n <= 2 else pr.snr_low_derived
            lo, hi = low.value, pr.snr_high.value
        else:
            lo, hi = pr.noise_small.value, pr.noise_large.value
    elif target.kind == "ser" and target.i is not None:
        pt = ts._point(target.i)
        if axis == "snr":
            lo, hi = pt.snr_low.value, pt.snr_high.value
        else:
            lo, hi = pt.noise_small.value, pt.noise_large.value
    else:
        return None
    if lo is None or hi is None or lo >= hi:
        return None
    return lo, hi


def expected_parity(n: int, target: Target, axis: str) -> str:
    """Parity of inflection counts in the intermediate band: odd, even or none."""
    if target.kind == "pep":
        if axis == "snr":
            return "odd" if n <= 2 else "even"
        return "even"
    if target.kind == "ser" and target.i is not None:
        if axis == "snr":
            return "odd" if n > 2 else "none"
        return "odd"
    return "none"


# -----------------------------
# Inflection scan
# -----------------------------
@dataclass(frozen=True)
class Inflection:
    location: float
    lo: float
    hi: float
    confidence: float

    def to_dict(self) -> Dict[str, object]:
        return {"location": self.location, "lo": self.lo, "hi": self.hi, "confidence": self.confidence}


@dataclass
class ConvexityReport:
    axis: str
    intervals: List[Interval] = field(default_factory=list)
    inflections: List[Inflection] = field(default_factory=list)
    parity_expected: str = "none"
    parity_observed: Optional[str] = None
    status: str = "ok"
    confident: int = 0
    estimates: List[CurvatureEstimate] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)

    @property
    def sign_changes(self) -> int:
        return len(self.inflections)

    @property
    def indeterminate(self) -> List[float]:
        return [e.at for e in self.estimates if e.sign == "0"]

    @property
    def parity_matches(self) -> Optional[bool]:
        if self.parity_observed is None or self.parity_expected == "none":
            return None
        return self.parity_observed == self.parity_expected

    def to_dict(self) -> Dict[str, object]:
        return {
            "axis": self.axis,
            "status": self.status,
            "intervals": [iv.to_dict() for iv in self.intervals],
            "inflections": [f.to_dict() for f in self.inflections],
            "sign_changes": self.sign_changes,
            "confident": self.confident,
            "indeterminate": self.indeterminate,
            "parity_expected": self.parity_expected,
            "parity_observed": self.parity_observed,
            "estimates": [e.to_dict() for e in self.estimates],
            "notes": list(self.notes),
        }


def inflection_scan(
    metric: Callable[[float, int, int], CurvatureEstimate],
    grid: Sequence[float],
    samples: int,
    seed: int,
    *,
    axis: str = "snr",
    parity_expected: str = "none",
    min_confident: int = MIN_CONFIDENT,
) -> ConvexityReport:
    """
    Confident second-derivative signs over `grid` and the sign changes between them.

    Each inflection sits at the midpoint between the two bracketing confident
    grid points; indeterminate points are reported but never counted.
    """
    values = [float(v) for v in grid]
    if not values:
        raise PreconditionError("inflection scan needs a non-empty grid")
    if any(v <= 0 for v in values):
        raise PreconditionError("grid values must be positive")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise PreconditionError("grid must be strictly increasing")
    if len(values) < min_confident:
        logger.warning("[convexity] grid has %d points (< %d)", len(values), min_confident)

    estimates = [metric(v, samples, seed) for v in values]
    report = ConvexityReport(axis=axis, parity_expected=parity_expected, estimates=estimates)

    run_start = 0
    for k in range(1, len(estimates) + 1):
        if k == len(estimates) or estimates[k].verdict != estimates[run_start].verdict:
            report.intervals.append(
                Interval(
                    values[run_start],
                    values[k - 1],
                    estimates[run_start].verdict,
                    "empirical",
                )
            )
            run_start = k

    confident = [e for e in estimates if e.sign != "0"]
    report.confident = len(confident)
    for prev, cur in zip(confident, confident[1:]):
        if prev.sign != cur.sign:
            report.inflections.append(
                Inflection(
                    location=0.5 * (prev.at + cur.at),
                    lo=prev.at,
                    hi=cur.at,
                    confidence=min(prev.z, cur.z),
                )
            )

    if report.confident < 2:
        report.status = "insufficient confidence"
        report.notes.append(f"only {report.confident} confident signs on {len(values)} grid points")
    elif report.confident < min_confident:
        report.notes.append(
            f"{report.confident} confident signs (< {min_confident}); parity not asserted"
        )
        if parity_expected != "none":
            report.status = "insufficient confidence"
    else:
        report.parity_observed = "odd" if report.sign_changes % 2 else "even"

    logger.info(
        "[convexity] scan on %s: %d/%d confident, %d sign changes, status=%s",
        axis,
        report.confident,
        len(values),
        report.sign_changes,
        report.status,
    )
    return report


def log_grid(lo: float, hi: float, points: int) -> List[float]:
    if lo <= 0 or hi <= lo or points < 2:
        raise PreconditionError(f"log grid needs 0 < lo < hi and >= 2 points, got ({lo}, {hi}, {points})")
    return [float(v) for v in np.geomspace(lo, hi, points)]


def band_grid(band: Tuple[float, float], points: int, margin: float = 0.02) -> List[float]:
    """Log grid strictly inside an intermediate band."""
    lo, hi = band
    return log_grid(lo * (1.0 + margin), hi * (1.0 - margin), points)


# -----------------------------
# Sphere hardening
# -----------------------------
def _first_true(pred: Callable[[int], bool]) -> int:
    """Smallest n >= 1 with pred(n), for predicates that stay true once true."""
    if pred(1):
        return 1
    hi = 2
    while not pred(hi):
        hi *= 2
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return hi


def hardening_chain_holds(n: int, noise_power: float, eps: float) -> bool:
    """n(σ₀²+ε) > (n+√(2n))σ₀²."""
    return n * (noise_power + eps) > (n + math.sqrt(2.0 * n)) * noise_power


def small_noise_chain_holds(n: int, noise_power: float, eps: float) -> bool:
    """n(σ₀²+ε) > (n+2+√(2(n+2)))σ₀²."""
    return n * (noise_power + eps) > (n + 2 + math.sqrt(2.0 * (n + 2))) * noise_power


def minimal_hardening_dim(noise_power: float, eps: float) -> int:
    # n·ε > √(2n)·σ₀² is monotone in n; search the predicate itself
    if noise_power <= 0 or eps <= 0:
        raise PreconditionError(f"noise power and eps must be positive, got {noise_power}, {eps}")
    return _first_true(lambda n: hardening_chain_holds(n, noise_power, eps))


@dataclass(frozen=True)
class SphereHardeningReport:
    constellation: str
    n: int
    noise_power: float
    eps: float
    radius: float
    d_min: float
    enclosing_points: Tuple[bool, ...]
    enclosing: bool
    chain_holds: bool
    minimal_n: int
    small_noise_chain_holds: bool
    minimal_n_small_noise: int

    @property
    def verdict(self) -> str:
        return "enclosing" if self.enclosing else "not enclosing"

    @property
    def high_snr_condition(self) -> bool:
        return self.enclosing and self.chain_holds

    @property
    def conclusion(self) -> str:
        if self.high_snr_condition:
            return "high-SNR condition d_min² >= (n+√(2n))σ₀² satisfied: SER, PEP and BER convex in SNR"
        if self.enclosing:
            return f"regions enclose the hardened sphere but the chain needs n >= {self.minimal_n}"
        return "regions do not enclose the hardened noise sphere"

    def to_dict(self) -> Dict[str, object]:
        return {
            "constellation": self.constellation,
            "n": self.n,
            "noise_power": self.noise_power,
            "eps": self.eps,
            "radius": self.radius,
            "d_min": self.d_min,
            "enclosing_points": list(self.enclosing_points),
            "verdict": self.verdict,
            "chain_holds": self.chain_holds,
            "minimal_n": self.minimal_n,
            "small_noise_chain_holds": self.small_noise_chain_holds,
            "minimal_n_small_noise": self.minimal_n_small_noise,
            "high_snr_condition": self.high_snr_condition,
            "conclusion": self.conclusion,
        }


def sphere_hardening_report(
    c: Constellation, noise_power: float, eps: Optional[float] = None
) -> SphereHardeningReport:
    if noise_power <= 0:
        raise PreconditionError(f"noise power must be positive, got {noise_power}")
    eps = noise_power / 10.0 if eps is None else eps
    if eps <= 0:
        raise PreconditionError(f"eps must be positive, got {eps}")

    n = c.dim
    radius = math.sqrt(n * (noise_power + eps))
    regions = [voronoi_region(c, i) for i in range(c.size)]
    per_point = tuple(contains_ball(r, radius) for r in regions)
    d_min = min(float(r.offsets.min()) for r in regions)

    report = SphereHardeningReport(
        constellation=c.name,
        n=n,
        noise_power=noise_power,
        eps=eps,
        radius=radius,
        d_min=d_min,
        enclosing_points=per_point,
        enclosing=all(per_point),
        chain_holds=hardening_chain_holds(n, noise_power, eps),
        minimal_n=minimal_hardening_dim(noise_power, eps),
        small_noise_chain_holds=small_noise_chain_holds(n, noise_power, eps),
        minimal_n_small_noise=_first_true(lambda k: small_noise_chain_holds(k, noise_power, eps)),
    )
    logger.info("[convexity] sphere hardening %s: %s", c.name, report.conclusion)
    return report


def chi_square_floor(n: int, samples: int, seed: int) -> Estimate:
    """Monte Carlo Pr{|ξ|² > (n+√(2n))σ₀²} with σ₀² = 1."""
    if n < 1:
        raise PreconditionError(f"dimension must be >= 1, got {n}")
    level = CurvatureConstants.for_dim(n).alpha1
    moments = accumulate(samples, seed, chi_square(n), lambda t: (t > level).astype(float))
    mean = float(moments.mean[0])
    hits = int(round(moments.total[0]))
    return Estimate(
        mean=mean,
        std_err=math.sqrt(mean * (1.0 - mean) / samples),
        samples=samples,
        seed=seed,
        hits=hits,
    )


def chi_square_floor_exact(n: int) -> float:
    if n < 1:
        raise PreconditionError(f"dimension must be >= 1, got {n}")
    return float(chi2.sf(CurvatureConstants.for_dim(n).alpha1, n))


# -----------------------------
# Conjecture probe
# -----------------------------
@dataclass(frozen=True)
class Calibration:
    gamma0: Optional[float]
    estimate: Optional[Estimate]
    target: float
    reachable: bool
    note: Optional[str] = None


def calibrate_gamma0(
    code: Constellation,
    target: float = 1e-2,
    samples: int = 100_000,
    seed: int = 0,
    lo: float = 1e-2,
    hi: float = 1e4,
    rel_tol: float = 1e-2,
) -> Calibration:
    """
    Bisection on log γ for SER(γ₀) ≈ target, with the same seed at every step.
    """
    if not 0 < target < 1:
        raise PreconditionError(f"target error rate must lie in (0, 1), got {target}")

    def ser(g: float) -> Estimate:
        return ser_avg_mc(code, channel_at("snr", g), samples, seed)

    top = ser(hi)
    if top.mean > target:
        return Calibration(
            None, top, target, False, note=f"SER({hi:g}) = {top.mean:.3g} still above target {target:g}"
        )
    bottom = ser(lo)
    if bottom.mean <= target:
        return Calibration(lo, bottom, target, True, note=f"SER already <= target at γ = {lo:g}")
    if target < 10.0 / samples:
        logger.warning(
            "[convexity] target %.1e below resolution of %d samples; calibration is coarse", target, samples
        )

    best = top
    while hi / lo > 1.0 + rel_tol:
        mid = math.sqrt(lo * hi)
        est = ser(mid)
        if est.mean > target:
            lo = mid
        else:
            hi, best = mid, est
    logger.info("[convexity] calibrated γ0=%.6g (SER=%.3g) for %s", hi, best.mean, code.name)
    return Calibration(hi, best, target, True)


@dataclass
class ConjectureReport:
    constellation: str
    calibration: Calibration
    reports: Dict[str, ConvexityReport] = field(default_factory=dict)
    counterexamples: List[Dict[str, object]] = field(default_factory=list)
    status: str = "ok"
    label: str = "empirical"

    def to_dict(self) -> Dict[str, object]:
        cal = self.calibration
        return {
            "constellation": self.constellation,
            "label": self.label,
            "status": self.status,
            "gamma0": cal.gamma0,
            "target": cal.target,
            "ser_at_gamma0": None if cal.estimate is None else cal.estimate.to_dict(),
            "calibration_note": cal.note,
            "reports": {k: r.to_dict() for k, r in self.reports.items()},
            "counterexamples": list(self.counterexamples),
        }


def conjecture_probe(
    code: Constellation,
    gamma0: Optional[float] = None,
    grid: Optional[Sequence[float]] = None,
    samples: int = 100_000,
    seed: int = 0,
    *,
    target: float = 1e-2,
    points: int = 10,
) -> ConjectureReport:
    if gamma0 is None:
        cal = calibrate_gamma0(code, target=target, samples=samples, seed=seed)
    else:
        if gamma0 <= 0:
            raise PreconditionError(f"γ0 must be positive, got {gamma0}")
        cal = Calibration(gamma0, ser_avg_mc(code, channel_at("snr", gamma0), samples, seed), target, True)

    report = ConjectureReport(constellation=code.name, calibration=cal)
    if not cal.reachable:
        report.status = "target unreachable"
        logger.warning("[convexity] conjecture probe: %s", cal.note)
        return report

    g0 = cal.gamma0
    values = log_grid(g0, 10.0 * g0, points) if grid is None else [float(v) for v in grid]
    low = [v for v in values if v < g0 * (1.0 - 1e-12)]
    if low:
        raise PreconditionError(f"grid points {low} lie below γ0 = {g0:.6g}")

    metrics = ["ser"] + (["ber"] if code.labels is not None else [])
    for name in metrics:
        metric = curvature_metric(code, Target(name), "snr")
        scan = inflection_scan(metric, values, samples, seed, axis="snr", min_confident=2)
        report.reports[name] = scan
        for est in scan.estimates:
            if est.sign == "-":
                report.counterexamples.append({"metric": name, **est.to_dict()})

    if report.counterexamples:
        report.status = "counterexample candidates"
        logger.warning(
            "[convexity] %d confident negative curvature points above γ0", len(report.counterexamples)
        )
    return report


# -----------------------------
# Time/power sharing
# -----------------------------
@dataclass(frozen=True)
class JensenReport:
    target: str
    axis: str
    a: float
    b: float
    lam: float
    mixed: float
    value_a: Estimate
    value_b: Estimate
    value_mixed: Estimate
    combined_std_err: float
    rule: Optional[str]

    @property
    def chord(self) -> float:
        return self.lam * self.value_a.mean + (1.0 - self.lam) * self.value_b.mean

    @property
    def gain(self) -> float:
        """Error-rate increase from sharing: chord minus value at the mixed point."""
        return self.chord - self.value_mixed.mean

    @property
    def holds(self) -> bool:
        return self.value_mixed.mean <= self.chord + 3.0 * self.combined_std_err

    def to_dict(self) -> Dict[str, object]:
        out: Dict[str, object] = {
            "target": self.target,
            "axis": self.axis,
            "a": self.a,
            "b": self.b,
            "lambda": self.lam,
            "mixed": self.mixed,
            "value_a": self.value_a.to_dict(),
            "value_b": self.value_b.to_dict(),
            "value_mixed": self.value_mixed.to_dict(),
            "chord": self.chord,
            "combined_std_err": self.combined_std_err,
            "holds": self.holds,
            "rule": self.rule,
        }
        if self.axis == "noise_power":
            out["sharing_gain"] = self.gain
            out["sharing_helps_jammer"] = self.gain >= -3.0 * self.combined_std_err
        return out


def _refusal(ts: ThresholdSet, target: Target, axis: str, name: str, x: float) -> PreconditionError:
    governing = [r for r in ts.rules(target, axis) if r.certified and r.verdict == CONVEX]
    detail = "; ".join(r.describe() for r in governing) or "no certified convex region"
    return PreconditionError(
        f"{name} = {x:g} is outside a certified convex region of {target} on {axis} ({detail})"
    )


def jensen_probe(
    c: Constellation,
    target: Target,
    axis: str,
    a: float,
    b: float,
    lam: float,
    samples: int,
    seed: int,
    ts: Optional[ThresholdSet] = None,
) -> JensenReport:
    """
    Check metric(λa + (1-λ)b) <= λ·metric(a) + (1-λ)·metric(b) on one stream.
    """
    if not 0.0 <= lam <= 1.0:
        raise PreconditionError(f"mixing weight must lie in [0, 1], got {lam}")
    ts = ts or thresholds(c)
    mixed = lam * a + (1.0 - lam) * b

    certified = {}
    for name, x in (("a", a), ("b", b), ("mixed", mixed)):
        verdict = classify(c, axis, target, x, ts)
        if verdict.verdict != CONVEX:
            raise _refusal(ts, target, axis, name, x)
        certified[name] = verdict.rule
    if certified["a"] != certified["b"]:
        raise PreconditionError(
            f"a and b lie in different convex regions ({certified['a']} vs {certified['b']})"
        )

    metric = metric_for(c, target, axis)
    ea = metric(a, samples, seed)
    eb = metric(b, samples, seed)
    em = metric(mixed, samples, seed)
    sigma = math.sqrt(em.std_err**2 + (lam * ea.std_err) ** 2 + ((1.0 - lam) * eb.std_err) ** 2)

    report = JensenReport(
        target=str(target),
        axis=axis,
        a=a,
        b=b,
        lam=lam,
        mixed=mixed,
        value_a=ea,
        value_b=eb,
        value_mixed=em,
        combined_std_err=sigma,
        rule=certified["a"],
    )
    logger.info(
        "[convexity] jensen %s on %s: mixed=%.4g chord=%.4g holds=%s",
        target,
        axis,
        em.mean,
        report.chord,
        report.holds,
    )
    return report
