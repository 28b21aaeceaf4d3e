"""
Acceptance checks run by `verify`.

Each check takes a CheckContext and returns (passed, details). Raising is
allowed: the graph records the exception as an error, never as a pass.
"""

from __future__ import annotations

import csv
import math
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from atlas.constellation import bpsk, grid, load, parse_builtin, qam
from atlas.convexity_analysis import (
    band_grid,
    chi_square_floor,
    chi_square_floor_exact,
    expected_parity,
    hardening_chain_holds,
    inflection_scan,
    intermediate_band,
    jensen_probe,
    thresholds,
)
from atlas.curvature import (
    CurvatureConstants,
    curvature_metric,
    d2_pdf_dnoise,
    d2_pdf_dsnr,
    f_snr,
    noise_pdf,
    oracle_d2_snr,
    pep_d2_noise_mc,
    pep_d2_snr_mc,
    ser_d2_snr_mc,
)
from atlas.error_engine import Target, channel_at, oracle_ser, parse_target, ser_avg_mc
from atlas.geometry import pep_region, sample_region
from pipelines.atlas.state import RunConfig
from pipelines.atlas.sweep.graph import metric_filename
from pipelines.atlas.sweep.graph import run as run_sweep
from utils.logger import get_logger

logger = get_logger(__name__)

Z = 3.0

# 16-QAM: points 5 and 6 are adjacent inner points (index = 4·ix + iy)
QAM16_PAIR = (6, 5)
# 3×3×3 grid: point 13 is the center, 12 one of its face neighbours
GRID3_PAIR = (12, 13)
PARITY_POINTS = 30


@dataclass(frozen=True)
class CheckContext:
    samples: int
    seed: int
    fixtures: Tuple[str, ...] = ()


CheckResult = Tuple[bool, List[str]]


def _within(est, expected: float, label: str, details: List[str]) -> bool:
    ok = abs(est.mean - expected) <= Z * est.std_err
    details.append(
        f"{label}: mc={est.mean:.6g} ± {est.std_err:.2g} oracle={expected:.6g} {'ok' if ok else 'FAIL'}"
    )
    return ok


def check_oracle_ser(ctx: CheckContext) -> CheckResult:
    details: List[str] = []
    ok = True
    for kind, gammas in (("bpsk", (0.5, 1, 2, 4, 8, 16)), ("qpsk", (2, 8, 20))):
        c = parse_builtin(kind)
        for g in gammas:
            est = ser_avg_mc(c, channel_at("snr", g), ctx.samples, ctx.seed)
            ok &= _within(est, oracle_ser(kind, g), f"{kind} γ={g}", details)
    return ok, details


def _five_point(fn: Callable[[float], float], at: float, h: float) -> float:
    return (
        -fn(at + 2 * h) + 16 * fn(at + h) - 30 * fn(at) + 16 * fn(at - h) - fn(at - 2 * h)
    ) / (12 * h * h)


def check_integrand(ctx: CheckContext) -> CheckResult:
    details: List[str] = []
    ok = True
    radii = (0.1, 0.5, 1.0, 1.5, 2.5)
    params = (0.5, 1.0, 2.0, 4.0, 8.0)
    for n in (1, 2, 3, 4):
        direction = np.ones(n) / math.sqrt(n)
        for axis in ("snr", "noise_power"):
            analytic, numeric = [], []
            for r in radii:
                x = r * direction
                for p in params:
                    if axis == "snr":
                        analytic.append(float(d2_pdf_dsnr(x, p)))
                        numeric.append(_five_point(lambda g: float(noise_pdf(x, 1.0 / g)), p, 2e-3 * p))
                    else:
                        q = p / 4.0
                        analytic.append(float(d2_pdf_dnoise(x, q)))
                        numeric.append(_five_point(lambda v: float(noise_pdf(x, v)), q, 2e-3 * q))
            a, b = np.array(analytic), np.array(numeric)
            good = np.isclose(b, a, rtol=1e-5, atol=1e-8 * np.abs(a).max())
            ok &= bool(good.all())
            details.append(f"n={n} {axis}: {int(good.sum())}/{good.size} grid points agree")

    # the two-power prefactor coincides with (2πP_N)^(-n/2) only at n = 4
    x4 = np.full(4, 0.5)
    t = float(np.sum(x4 * x4))
    k = CurvatureConstants.for_dim(4)
    for P in (0.5, 1.0, 2.0):
        two_power = (
            (1.0 / (2 * math.pi * P)) ** 2
            * math.exp(-t / (2 * P))
            * (t - k.beta1 * P)
            * (t - k.beta2 * P)
            / (4 * P**4)
        )
        same = math.isclose(two_power, float(d2_pdf_dnoise(x4, P)), rel_tol=1e-12)
        ok &= same
        details.append(f"n=4 P_N={P}: two-power prefactor agrees={same}")
    return ok, details


def check_low_dim_convexity(ctx: CheckContext) -> CheckResult:
    details: List[str] = []
    gammas = np.geomspace(0.01, 100.0, 50)
    closed = [oracle_d2_snr("bpsk", float(g)) for g in gammas]
    ok = all(v > 0 for v in closed)
    details.append(f"bpsk closed-form curvature positive on {len(gammas)} points: {ok}")

    for kind in ("bpsk", "qpsk"):
        c = parse_builtin(kind)
        for g in (0.5, 1.0, 2.0, 4.0, 8.0, 16.0):
            est = ser_d2_snr_mc(c, g, ctx.samples, ctx.seed)
            good = est.sign != "-"
            ok &= good
            details.append(f"{kind} γ={g}: d2={est.value:.4g} ± {est.std_err:.2g} sign={est.sign}")
    return ok, details


def check_pep_sign_regions(ctx: CheckContext) -> CheckResult:
    details: List[str] = []
    c = qam(16)
    i, j = QAM16_PAIR
    ts = thresholds(c)
    pair = ts.pair(i, j)
    details.append(
        f"qam16 pair {i}->{j}: concave below {pair.snr_low_printed.value:.4g}, convex above {pair.snr_high.value:.4g}"
    )

    low = pep_d2_snr_mc(c, i, j, 2.0, ctx.samples, ctx.seed)
    high = pep_d2_snr_mc(c, i, j, 45.0, ctx.samples, ctx.seed)
    ok = low.sign == "-" and high.sign == "+"
    details.append(f"γ=2: {low.value:.4g} ± {low.std_err:.2g} ({low.sign})")
    details.append(f"γ=45: {high.value:.4g} ± {high.std_err:.2g} ({high.sign})")

    region = pep_region(c, i, j)
    pts = sample_region(region, 10_000, seed=ctx.seed)
    t = np.sum(pts * pts, axis=1)
    case_high = bool(np.all(f_snr(t, 45.0, c.dim) >= 0))
    case_low = bool(np.all(f_snr(t, 3.0, c.dim) <= 0))
    ok &= case_high and case_low
    details.append(f"sign of f >= 0 at γ=45 on 10^4 region points: {case_high}")
    details.append(f"sign of f <= 0 at γ=3 on 10^4 region points: {case_low}")
    return ok, details


def _parity(c, pair: Tuple[int, int], samples: int, seed: int) -> Tuple[Optional[bool], str]:
    target = Target("pep", *pair)
    band = intermediate_band(c, target, "snr")
    if band is None:
        return None, f"{c.name} pair {pair}: no intermediate band"
    report = inflection_scan(
        curvature_metric(c, target, "snr"),
        band_grid(band, PARITY_POINTS),
        samples,
        seed,
        axis="snr",
        parity_expected=expected_parity(c.dim, target, "snr"),
    )
    line = (
        f"{c.name} pair {pair} band ({band[0]:.4g}, {band[1]:.4g}): {report.sign_changes} sign changes, "
        f"{report.confident}/{PARITY_POINTS} confident, expected {report.parity_expected}, "
        f"status={report.status}"
    )
    return report.parity_matches, line


def check_parity(ctx: CheckContext) -> CheckResult:
    details: List[str] = []
    ok = True
    for c, pair in ((qam(16), QAM16_PAIR), (grid(3, 3), GRID3_PAIR)):
        verdict, line = _parity(c, pair, ctx.samples, ctx.seed)
        details.append(line)
        if verdict is None:
            logger.warning("[verify] parity inconclusive for %s; escalating to %d samples", c.name, 10 * ctx.samples)
            verdict, line = _parity(c, pair, 10 * ctx.samples, ctx.seed)
            details.append("escalated: " + line)
        if verdict is None:
            details.append(f"{c.name}: insufficient confidence")
        ok &= bool(verdict)
    return ok, details


def check_noise_power_convexity(ctx: CheckContext) -> CheckResult:
    details: List[str] = []
    c = bpsk()
    est = pep_d2_noise_mc(c, 0, 1, 0.1, ctx.samples, ctx.seed)
    ok = est.sign == "+"
    details.append(f"bpsk P_N=0.1: {est.value:.4g} ± {est.std_err:.2g} ({est.sign})")

    g3 = grid(3, 3)
    i, j = GRID3_PAIR
    bound = thresholds(g3).pair(i, j).noise_large.value
    at = 1.2 * bound
    est = pep_d2_noise_mc(g3, i, j, at, ctx.samples, ctx.seed)
    ok &= est.sign == "+"
    details.append(f"grid3x3x3 pair {i}->{j} P_N={at:.4g} (bound {bound:.4g}): {est.value:.4g} ± {est.std_err:.2g} ({est.sign})")
    return ok, details


def check_chi_square_floor(ctx: CheckContext) -> CheckResult:
    details: List[str] = []
    e64 = chi_square_floor(64, ctx.samples, ctx.seed)
    e256 = chi_square_floor(256, ctx.samples, ctx.seed)
    ok = 0.13 <= e64.mean <= 0.20 and abs(e256.mean - 0.1587) <= 0.01
    details.append(f"n=64: {e64.mean:.4f} (exact {chi_square_floor_exact(64):.4f})")
    details.append(f"n=256: {e256.mean:.4f} (exact {chi_square_floor_exact(256):.4f})")

    chain = [hardening_chain_holds(n, 1.0, 1.0) for n in range(1, 101)]
    chain_ok = not chain[0] and not chain[1] and all(chain[2:])
    ok &= chain_ok
    details.append(f"hardening chain with eps = σ₀² holds exactly for n >= 3: {chain_ok}")
    return ok, details


JENSEN_PAIRS = 20
JENSEN_MAX_SAMPLES = 200_000
# (builtin, target, axis, draw range) inside a certified convex region
JENSEN_CASES = (
    ("qam16", "ber", "snr", (41.0, 100.0)),
    ("bpsk", "ser", "noise_power", (0.05, 0.18)),
)


def check_jensen(ctx: CheckContext) -> CheckResult:
    details: List[str] = []
    ok = True
    samples = min(ctx.samples, JENSEN_MAX_SAMPLES)
    rng = np.random.default_rng(ctx.seed)
    for name, metric, axis, (lo, hi) in JENSEN_CASES:
        c = parse_builtin(name)
        target = parse_target(metric)
        ts = thresholds(c)

        held = 0
        for k in range(JENSEN_PAIRS):
            a, b = (float(v) for v in rng.uniform(lo, hi, size=2))
            lam = float(rng.uniform())
            report = jensen_probe(c, target, axis, a, b, lam, samples, ctx.seed + k, ts)
            held += report.holds
        ok &= held == JENSEN_PAIRS
        details.append(f"{name} {metric} on {axis}: {held}/{JENSEN_PAIRS} random pairs hold within 3σ")

        a, b = lo + 0.25 * (hi - lo), lo + 0.75 * (hi - lo)
        one = jensen_probe(c, target, axis, a, b, 1.0, samples, ctx.seed, ts)
        zero = jensen_probe(c, target, axis, a, b, 0.0, samples, ctx.seed, ts)
        exact = (
            one.value_mixed == one.value_a
            and zero.value_mixed == zero.value_b
            and one.gain == 0.0
            and zero.gain == 0.0
        )
        ok &= exact
        details.append(f"{name} {metric} on {axis}: λ ∈ {{0, 1}} endpoints exact={exact}")
    return ok, details


DETERMINISM_BUILTIN = "qam16"
DETERMINISM_METRICS = ("ser", "ber")
DETERMINISM_Z = 5.0
DETERMINISM_SHARE = 0.95


def _sweep_files(config: RunConfig) -> Dict[str, bytes]:
    result = run_sweep(config)
    return {Path(f).name: Path(f).read_bytes() for f in result["files"]}


def _rate_table(text: bytes) -> List[Dict[str, str]]:
    lines = [l for l in text.decode("utf-8").splitlines() if not l.startswith("#")]
    return list(csv.DictReader(lines))


def check_determinism(ctx: CheckContext) -> CheckResult:
    details: List[str] = []
    with tempfile.TemporaryDirectory(prefix="atlas-verify-") as tmp:
        base = RunConfig(
            command="sweep",
            builtin=DETERMINISM_BUILTIN,
            metrics=DETERMINISM_METRICS,
            grid_min=0.5,
            grid_max=16.0,
            grid_points=10,
            samples=ctx.samples,
            seed=ctx.seed,
            out=str(Path(tmp) / "first"),
        )
        first = _sweep_files(base)
        second = _sweep_files(RunConfig.from_dict(base.to_dict(), out=str(Path(tmp) / "second")))
        reseeded = _sweep_files(
            RunConfig.from_dict({**base.to_dict(), "seed": ctx.seed + 1}, out=str(Path(tmp) / "reseeded"))
        )

    identical = first == second
    details.append(f"rerun with identical config: {len(first)} files byte-identical={identical}")

    close = total = 0
    for metric in DETERMINISM_METRICS:
        fname = metric_filename(metric)
        for x, y in zip(_rate_table(first[fname]), _rate_table(reseeded[fname])):
            spread = DETERMINISM_Z * math.hypot(float(x["std_err"]), float(y["std_err"]))
            close += abs(float(x["mean"]) - float(y["mean"])) <= spread
            total += 1
    share = close / total if total else 0.0
    stable = total > 0 and share >= DETERMINISM_SHARE
    details.append(f"seed {ctx.seed} vs {ctx.seed + 1}: {close}/{total} points within {DETERMINISM_Z:g}σ")
    return identical and stable, details


FIXTURE_BUILTINS = ("bpsk", "qpsk", "qam16", "psk8", "grid3x3x3")


def check_fixtures(ctx: CheckContext) -> CheckResult:
    details: List[str] = []
    for name in FIXTURE_BUILTINS:
        c = parse_builtin(name)
        details.append(f"{name}: M={c.size} n={c.dim} normalized={c.is_normalized}")
    for path in ctx.fixtures:
        c = load(path)
        thresholds(c)
        details.append(f"{path}: M={c.size} n={c.dim} loaded")
    return True, details


CHECKS: Dict[str, Callable[[CheckContext], CheckResult]] = {
    "oracle-ser": check_oracle_ser,
    "integrand": check_integrand,
    "low-dim-convexity": check_low_dim_convexity,
    "pep-sign-regions": check_pep_sign_regions,
    "parity": check_parity,
    "noise-power-convexity": check_noise_power_convexity,
    "chi-square-floor": check_chi_square_floor,
    "jensen": check_jensen,
    "determinism": check_determinism,
    "fixtures": check_fixtures,
}

DEFAULT_CHECK_ORDER: List[str] = list(CHECKS)
