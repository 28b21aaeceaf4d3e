import math

import numpy as np
import pytest

from atlas.constellation import Constellation, parse_builtin, random_spherical
from atlas.convexity_analysis import (
    CONCAVE,
    CONVEX,
    INDETERMINATE,
    PRINTED_CLAIM,
    band_grid,
    calibrate_gamma0,
    chi_square_floor,
    chi_square_floor_exact,
    classify,
    conjecture_probe,
    expected_parity,
    hardening_chain_holds,
    inflection_scan,
    intermediate_band,
    jensen_probe,
    log_grid,
    minimal_hardening_dim,
    small_noise_chain_holds,
    sphere_hardening_report,
    theorem_intervals,
    thresholds,
)
from atlas.curvature import CurvatureConstants, CurvatureEstimate, curvature_metric, f_snr
from atlas.error_engine import Target, q_function
from atlas.errors import PreconditionError
from atlas.geometry import pep_region, sample_region

QAM16_PAIR = (6, 5)
GRID3_PAIR = (12, 13)

K3 = CurvatureConstants.for_dim(3)
GRID_STEP = 1 / math.sqrt(2)
GRID_REACH = GRID_STEP + math.sqrt(3) / (2 * math.sqrt(2))


@pytest.fixture(scope="module")
def qam16_ts(qam16_c):
    return thresholds(qam16_c)


@pytest.fixture(scope="module")
def grid3_ts(grid3_c):
    return thresholds(grid3_c)


# -----------------------------
# thresholds
# -----------------------------
def test_bpsk_thresholds(bpsk_c):
    ts = thresholds(bpsk_c)
    assert ts.ser_snr_high.value == pytest.approx(1 + math.sqrt(2), rel=1e-12)
    assert ts.pair(0, 1).noise_small.value == pytest.approx(1 / (3 + math.sqrt(6)), rel=1e-12)
    large = ts.points[0].noise_large
    assert large.value is None and large.vacuous
    assert "vacuous" in large.describe()
    assert large.to_dict()["value"] is None


def test_qam16_thresholds(qam16_ts):
    assert qam16_ts.d_min == pytest.approx(1 / math.sqrt(10), rel=1e-12)
    assert qam16_ts.ber_snr_high.value == pytest.approx(40.0, rel=1e-12)
    assert qam16_ts.ser_snr_high.value == max(p.snr_high.value for p in qam16_ts.points)

    pair = qam16_ts.pair(*QAM16_PAIR)
    reach = 2 / math.sqrt(10) + math.sqrt(2) / math.sqrt(10)
    assert pair.snr_high.value == pytest.approx(40.0, rel=1e-12)
    assert pair.snr_low_printed.value == pytest.approx(4 / reach**2, rel=1e-9)
    assert pair.snr_low_printed.value == pytest.approx(3.4314, abs=1e-4)
    assert pair.snr_low_printed.verdict == CONCAVE
    assert pair.snr_low_derived.value is None


def test_qam16_corner_pair_is_vacuous(qam16_ts):
    pair = qam16_ts.pair(5, 0)
    assert pair.snr_low_printed.vacuous
    assert pair.noise_large.value is None


def test_grid3_pair_thresholds(grid3_ts):
    pair = grid3_ts.pair(*GRID3_PAIR)
    assert pair.d_ij == pytest.approx(GRID_STEP, rel=1e-12)
    assert pair.snr_high.value == pytest.approx(K3.alpha1 * 8, rel=1e-9)
    assert pair.snr_high.value == pytest.approx(43.6, abs=0.01)
    assert pair.snr_low_printed.value == pytest.approx(K3.alpha1 / GRID_REACH**2, rel=1e-9)
    assert pair.snr_low_printed.value == pytest.approx(3.13, abs=0.01)
    assert not pair.snr_low_printed.certified
    assert pair.snr_low_printed.verdict == PRINTED_CLAIM
    assert pair.snr_low_derived.value == pytest.approx(K3.alpha2 / GRID_REACH**2, rel=1e-9)
    assert pair.snr_low_derived.value == pytest.approx(0.316, abs=0.001)
    assert pair.noise_large.value == pytest.approx(GRID_REACH**2 / K3.beta2, rel=1e-9)
    assert pair.noise_small.value == pytest.approx(0.125 / K3.beta1, rel=1e-9)


def test_grid3_center_point_thresholds(grid3_ts):
    pt = grid3_ts.points[13]
    d_max = math.sqrt(3) / (2 * math.sqrt(2))
    assert pt.snr_low.value == pytest.approx(K3.alpha2 / d_max**2, rel=1e-9)
    assert pt.noise_large.value == pytest.approx(d_max**2 / K3.beta2, rel=1e-9)
    # edge point: unbounded region
    assert grid3_ts.points[0].snr_low.vacuous


def test_thresholds_scale_with_points(qam16_c, qam16_ts):
    scaled = Constellation(name="qam16x2", points=2 * qam16_c.points)
    assert thresholds(scaled).ber_snr_high.value == pytest.approx(qam16_ts.ber_snr_high.value / 4, rel=1e-9)


def test_pair_needs_distinct_points(qam16_ts):
    with pytest.raises(PreconditionError):
        qam16_ts.pair(2, 2)


# -----------------------------
# classification
# -----------------------------
@pytest.mark.parametrize("gamma", [0.01, 1.0, 100.0])
def test_low_dim_ser_is_always_convex(bpsk_c, gamma):
    verdict = classify(bpsk_c, "snr", Target("ser"), gamma)
    assert verdict.verdict == CONVEX
    assert verdict.rule == "ser.snr.low-dim"


def test_classify_qam16(qam16_c, qam16_ts):
    assert classify(qam16_c, "snr", Target("ber"), 50.0, qam16_ts).rule == "ber.snr.high"
    assert classify(qam16_c, "snr", Target("ber"), 10.0, qam16_ts).verdict == INDETERMINATE
    low = classify(qam16_c, "snr", Target("pep", *QAM16_PAIR), 2.0, qam16_ts)
    assert (low.verdict, low.rule) == (CONCAVE, "pep.snr.low-concave")


def test_classify_grid3_pair(grid3_c, grid3_ts):
    target = Target("pep", *GRID3_PAIR)
    low = classify(grid3_c, "snr", target, 0.2, grid3_ts)
    assert (low.verdict, low.rule) == (CONVEX, "pep.snr.low-convex")
    assert low.printed_claim == PRINTED_CLAIM

    mid = classify(grid3_c, "snr", target, 2.0, grid3_ts)
    assert mid.verdict == INDETERMINATE
    assert mid.printed_rule == "pep.snr.low-convex-printed"

    high = classify(grid3_c, "snr", target, 50.0, grid3_ts)
    assert (high.verdict, high.printed_claim) == (CONVEX, None)

    noisy = classify(grid3_c, "noise_power", target, 1.0, grid3_ts)
    assert (noisy.verdict, noisy.rule) == (CONVEX, "pep.noise.large")


def test_classify_noise_axis(bpsk_c):
    assert classify(bpsk_c, "noise_power", Target("pep", 0, 1), 0.1).verdict == CONVEX
    assert classify(bpsk_c, "noise_power", Target("pep", 0, 1), 0.5).verdict == INDETERMINATE
    with pytest.raises(PreconditionError):
        classify(bpsk_c, "noise_power", Target("ser"), 0.0)


def _assert_partition(intervals):
    assert intervals[0].lo == 0.0
    assert math.isinf(intervals[-1].hi)
    for a, b in zip(intervals, intervals[1:]):
        assert a.hi == b.lo
        assert a.lo < a.hi


def test_intervals_qam16_pair(qam16_c, qam16_ts):
    ivs = theorem_intervals(qam16_c, Target("pep", *QAM16_PAIR), "snr", qam16_ts)
    _assert_partition(ivs)
    assert [iv.verdict for iv in ivs] == [CONCAVE, INDETERMINATE, CONVEX]
    assert ivs[1].hi == pytest.approx(40.0)


def test_intervals_grid3_pair_note_printed_claim(grid3_c, grid3_ts):
    ivs = theorem_intervals(grid3_c, Target("pep", *GRID3_PAIR), "snr", grid3_ts)
    _assert_partition(ivs)
    assert [iv.verdict for iv in ivs] == [CONVEX, INDETERMINATE, CONVEX]
    assert ivs[1].note.startswith("pep.snr.low-convex-printed")


def test_intervals_bpsk_ser(bpsk_c):
    ivs = theorem_intervals(bpsk_c, Target("ser"), "snr")
    assert len(ivs) == 1
    assert ivs[0].verdict == CONVEX
    assert ivs[0].to_dict()["hi"] == "inf"


@pytest.mark.parametrize(
    "n, target, axis, parity",
    [
        (2, Target("pep", 0, 1), "snr", "odd"),
        (3, Target("pep", 0, 1), "snr", "even"),
        (3, Target("pep", 0, 1), "noise_power", "even"),
        (3, Target("ser", i=0), "snr", "odd"),
        (2, Target("ser", i=0), "snr", "none"),
        (2, Target("ser", i=0), "noise_power", "odd"),
        (2, Target("ser"), "snr", "none"),
    ],
)
def test_expected_parity(n, target, axis, parity):
    assert expected_parity(n, target, axis) == parity


def test_intermediate_band(qam16_c, grid3_c, qam16_ts, grid3_ts):
    lo, hi = intermediate_band(qam16_c, Target("pep", *QAM16_PAIR), "snr", qam16_ts)
    assert lo == qam16_ts.pair(*QAM16_PAIR).snr_low_printed.value
    assert hi == qam16_ts.pair(*QAM16_PAIR).snr_high.value
    lo, hi = intermediate_band(grid3_c, Target("pep", *GRID3_PAIR), "snr", grid3_ts)
    assert lo == grid3_ts.pair(*GRID3_PAIR).snr_low_derived.value
    assert intermediate_band(qam16_c, Target("ser"), "snr", qam16_ts) is None
    assert intermediate_band(qam16_c, Target("pep", 5, 0), "snr", qam16_ts) is None


# -----------------------------
# sign of f on sampled region points
# -----------------------------
def test_sign_factor_on_pair_region(qam16_c):
    region = pep_region(qam16_c, *QAM16_PAIR)
    pts = sample_region(region, 10_000, seed=1)
    t = np.sum(pts * pts, axis=1)
    assert np.all(f_snr(t, 45.0, 2) >= 0)
    assert np.all(f_snr(t, 3.0, 2) <= 0)


# -----------------------------
# inflection scans
# -----------------------------
def _synthetic(fn, se=0.01):
    def metric(v, samples, seed):
        return CurvatureEstimate(fn(v), se, samples, "snr", v, seed)

    return metric


def test_scan_finds_single_inflection():
    grid = list(np.linspace(1.0, 10.0, 25))
    report = inflection_scan(_synthetic(lambda v: v - 3.05), grid, 1000, 0, parity_expected="odd")
    assert report.sign_changes == 1
    assert report.inflections[0].location == pytest.approx(3.0625)
    assert report.parity_observed == "odd"
    assert report.parity_matches is True
    assert report.status == "ok"
    assert [iv.verdict for iv in report.intervals] == [CONCAVE, CONVEX]


def test_scan_skips_indeterminate_points():
    grid = list(np.linspace(1.0, 10.0, 25))
    # a dip to zero inside a convex run is not a sign change
    report = inflection_scan(_synthetic(lambda v: 0.0 if 4 < v < 6 else 1.0), grid, 1000, 0)
    assert report.sign_changes == 0
    assert report.indeterminate
    assert all(4 < v < 6 for v in report.indeterminate)


def test_scan_with_few_confident_points():
    report = inflection_scan(
        _synthetic(lambda v: 1.0), [1.0, 2.0, 3.0, 4.0, 5.0], 1000, 0, parity_expected="even"
    )
    assert report.status == "insufficient confidence"
    assert report.parity_observed is None
    assert report.parity_matches is None

    flat = inflection_scan(_synthetic(lambda v: 0.0, se=1.0), [1.0, 2.0, 3.0], 1000, 0)
    assert flat.status == "insufficient confidence"


def test_scan_rejects_bad_grids():
    with pytest.raises(PreconditionError):
        inflection_scan(_synthetic(lambda v: 1.0), [2.0, 1.0], 1000, 0)
    with pytest.raises(PreconditionError):
        inflection_scan(_synthetic(lambda v: 1.0), [], 1000, 0)
    with pytest.raises(PreconditionError):
        log_grid(0.0, 1.0, 5)


def test_band_grid_stays_inside():
    grid = band_grid((1.0, 10.0), 5)
    assert grid[0] > 1.0 and grid[-1] < 10.0
    assert len(grid) == 5


@pytest.mark.slow
def test_qam16_pair_parity_is_odd(qam16_c, qam16_ts):
    target = Target("pep", *QAM16_PAIR)
    band = intermediate_band(qam16_c, target, "snr", qam16_ts)
    report = inflection_scan(
        curvature_metric(qam16_c, target, "snr"),
        band_grid(band, 30),
        1_000_000,
        2024,
        parity_expected=expected_parity(2, target, "snr"),
    )
    assert report.status == "ok"
    assert report.parity_matches is True


@pytest.mark.slow
def test_grid3_pair_parity_is_never_odd(grid3_c, grid3_ts):
    # n = 3: an even number of sign changes, zero included
    target = Target("pep", *GRID3_PAIR)
    assert expected_parity(3, target, "snr") == "even"
    band = intermediate_band(grid3_c, target, "snr", grid3_ts)
    report = inflection_scan(
        curvature_metric(grid3_c, target, "snr"),
        band_grid(band, 30),
        1_000_000,
        2024,
        parity_expected="even",
    )
    assert report.confident >= 2
    assert report.parity_observed != "odd"
    assert report.parity_matches is not False
    if report.status == "ok":
        assert report.sign_changes % 2 == 0


FIXTURES = ("bpsk", "qpsk", "qam16", "psk8", "grid3x3x3")


def _certified_draw(rng, ts):
    """A (target, axis, value) inside a certified convex rule of `ts`."""
    m = ts.constellation.size
    while True:
        i, j = (int(v) for v in rng.choice(m, size=2, replace=False))
        target = [Target("ser"), Target("ser", i=i), Target("pep", i, j), Target("ber")][rng.integers(4)]
        axis = ("snr", "noise_power")[rng.integers(2)]
        rules = [r for r in ts.rules(target, axis) if r.certified and r.verdict == CONVEX and r.applies]
        if not rules:
            continue
        rule = rules[rng.integers(len(rules))]
        if math.isinf(rule.value):
            value = math.exp(rng.uniform(math.log(0.5), math.log(20.0)))
        elif rule.direction == "above":
            value = rule.value * rng.uniform(1.05, 3.0)
        else:
            value = rule.value * rng.uniform(0.2, 0.95)
        return target, axis, float(value)


@pytest.mark.slow
def test_certified_convex_is_never_confidently_concave():
    rng = np.random.default_rng(50)
    sets = {name: thresholds(parse_builtin(name)) for name in FIXTURES}
    for k in range(50):
        ts = sets[FIXTURES[k % len(FIXTURES)]]
        c = ts.constellation
        target, axis, value = _certified_draw(rng, ts)
        assert classify(c, axis, target, value, ts).verdict == CONVEX
        est = curvature_metric(c, target, axis)(value, 50_000, k)
        assert est.sign != "-", (c.name, str(target), axis, value, est.value, est.std_err)


# -----------------------------
# sphere hardening and the chi-square floor
# -----------------------------
def test_hardening_chain():
    assert minimal_hardening_dim(1.0, 1.0) == 3
    assert [hardening_chain_holds(n, 1.0, 1.0) for n in (1, 2, 3, 50)] == [False, False, True, True]
    m = minimal_hardening_dim(1.0, 0.5)
    assert m == 9
    assert hardening_chain_holds(m, 1.0, 0.5)
    assert not hardening_chain_holds(m - 1, 1.0, 0.5)


@pytest.mark.parametrize(
    "noise_power, eps", [(1.0, 0.2), (1.0, 0.1), (2.0, 0.5), (0.5, 0.25), (1.0, 1.0), (0.3, 0.07)]
)
def test_minimal_hardening_dim_is_the_first_dimension_that_holds(noise_power, eps):
    m = minimal_hardening_dim(noise_power, eps)
    assert hardening_chain_holds(m, noise_power, eps)
    assert m == 1 or not hardening_chain_holds(m - 1, noise_power, eps)


def test_minimal_hardening_dim_at_integer_ratio():
    # 2σ₀⁴/ε² = 50 exactly: the chain is an equality at n = 50
    assert minimal_hardening_dim(1.0, 0.2) == 51
    with pytest.raises(PreconditionError):
        minimal_hardening_dim(1.0, 0.0)


def test_sphere_not_enclosing(bpsk_c):
    report = sphere_hardening_report(bpsk_c, 1.0, 0.1)
    assert report.verdict == "not enclosing"
    assert not report.high_snr_condition
    assert report.to_dict()["radius"] == pytest.approx(math.sqrt(1.1))


def test_sphere_enclosing_random_code():
    code = random_spherical(16, 8, 0)
    d_min = thresholds(code).d_min
    report = sphere_hardening_report(code, 0.9 * d_min**2 / 16.0, eps=0.9 * d_min**2 / 16.0)
    assert report.verdict == "enclosing"
    assert report.chain_holds
    assert report.high_snr_condition

    thin = sphere_hardening_report(code, 0.9 * d_min**2 / 8.8)
    assert thin.verdict == "enclosing"
    assert not thin.chain_holds
    assert thin.minimal_n in (200, 201)
    assert small_noise_chain_holds(thin.minimal_n_small_noise, thin.noise_power, thin.eps)
    assert not small_noise_chain_holds(thin.minimal_n_small_noise - 1, thin.noise_power, thin.eps)


def test_sphere_rejects_bad_eps(bpsk_c):
    with pytest.raises(PreconditionError):
        sphere_hardening_report(bpsk_c, 1.0, 0.0)
    with pytest.raises(PreconditionError):
        sphere_hardening_report(bpsk_c, -1.0)


def test_chi_square_floor_exact():
    assert chi_square_floor_exact(1) == pytest.approx(2 * q_function(math.sqrt(1 + math.sqrt(2))), rel=1e-9)
    assert 0.13 <= chi_square_floor_exact(64) <= 0.20
    floor = q_function(1.0)
    assert abs(chi_square_floor_exact(256) - floor) < 0.01
    assert abs(chi_square_floor_exact(256) - floor) < abs(chi_square_floor_exact(64) - floor)


def test_chi_square_floor_mc():
    est = chi_square_floor(1, 200_000, 5)
    assert abs(est.mean - chi_square_floor_exact(1)) <= 4 * est.std_err
    assert 0.13 <= chi_square_floor(64, 100_000, 5).mean <= 0.20
    with pytest.raises(PreconditionError):
        chi_square_floor(0, 1000, 0)


# -----------------------------
# conjecture probe
# -----------------------------
def test_calibrate_bpsk(bpsk_c):
    cal = calibrate_gamma0(bpsk_c, target=1e-2, samples=200_000, seed=1)
    assert cal.reachable
    assert cal.gamma0 == pytest.approx(2.3263478740408408**2, rel=0.05)


def test_calibrate_unreachable(bpsk_c):
    cal = calibrate_gamma0(bpsk_c, target=1e-9, samples=2000, seed=0, hi=1.0)
    assert not cal.reachable
    assert cal.gamma0 is None
    with pytest.raises(PreconditionError):
        calibrate_gamma0(bpsk_c, target=1.5)


def test_conjecture_grid_below_gamma0(bpsk_c):
    with pytest.raises(PreconditionError):
        conjecture_probe(bpsk_c, gamma0=5.0, grid=[1.0, 5.0, 10.0], samples=2000)


def test_conjecture_bpsk_has_no_counterexamples(bpsk_c):
    # above 1+√2 every error sample carries a non-negative weight
    report = conjecture_probe(bpsk_c, gamma0=2.5, samples=50_000, seed=3)
    assert report.status == "ok"
    assert set(report.reports) == {"ser", "ber"}
    assert report.to_dict()["gamma0"] == 2.5


# -----------------------------
# Jensen / time sharing
# -----------------------------
def test_jensen_holds_for_bpsk(bpsk_c):
    report = jensen_probe(bpsk_c, Target("ser"), "snr", 2.0, 8.0, 0.5, 100_000, 1)
    assert report.holds
    assert report.mixed == 5.0
    assert report.gain > 0
    assert abs(report.value_mixed.mean - q_function(math.sqrt(5.0))) <= 4 * report.value_mixed.std_err


def test_jensen_lambda_zero_is_the_endpoint(bpsk_c):
    report = jensen_probe(bpsk_c, Target("ser"), "snr", 2.0, 8.0, 0.0, 20_000, 1)
    assert report.value_mixed == report.value_b
    assert report.gain == 0.0


def test_jensen_noise_axis_reports_sharing_gain(bpsk_c):
    report = jensen_probe(bpsk_c, Target("ser"), "noise_power", 0.05, 0.15, 0.5, 50_000, 2)
    doc = report.to_dict()
    assert "sharing_gain" in doc
    assert doc["rule"] == "ser.noise.small"


def test_jensen_refuses_outside_certified_region(qam16_c, qam16_ts):
    with pytest.raises(PreconditionError, match="ber.snr.high") as info:
        jensen_probe(qam16_c, Target("ber"), "snr", 30.0, 80.0, 0.5, 1000, 0, qam16_ts)
    assert "= 40" in str(info.value)


def test_jensen_refuses_mixed_regions(grid3_c, grid3_ts):
    with pytest.raises(PreconditionError, match="different convex regions"):
        jensen_probe(grid3_c, Target("pep", *GRID3_PAIR), "snr", 0.2, 50.0, 0.01, 1000, 0, grid3_ts)
    with pytest.raises(PreconditionError):
        jensen_probe(grid3_c, Target("pep", *GRID3_PAIR), "snr", 45.0, 50.0, 1.5, 1000, 0, grid3_ts)
