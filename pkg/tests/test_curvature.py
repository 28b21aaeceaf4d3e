import math

import numpy as np
import pytest

from atlas.curvature import (
    CurvatureConstants,
    CurvatureEstimate,
    curvature_mc,
    curvature_metric,
    d2_pdf_dnoise,
    d2_pdf_dsnr,
    f_noise,
    f_snr,
    finite_diff_d2,
    noise_pdf,
    oracle_d2_noise,
    oracle_d2_snr,
    pep_d2_noise_mc,
    pep_d2_snr_mc,
    ser_d2_snr_mc,
    ser_point_d2_snr_mc,
)
from atlas.error_engine import Target, channel_at, oracle_ser, pep_mc
from atlas.errors import PreconditionError, UsageError, ValidationError

SAMPLES = 400_000


def _within(est, expected, k=4.0):
    return abs(est.value - expected) <= k * est.std_err


@pytest.mark.parametrize("n", range(1, 11))
def test_constants(n):
    k = CurvatureConstants.for_dim(n)
    assert k.alpha1 * k.alpha2 == pytest.approx(n * n - 2 * n, abs=1e-9)
    assert k.beta1 * k.beta2 == pytest.approx((n + 2) ** 2 - 2 * (n + 2), abs=1e-9)
    assert (k.alpha2 <= 0) == (n <= 2)
    assert k.beta2 > 0


def test_constants_need_positive_dim():
    with pytest.raises(PreconditionError):
        CurvatureConstants.for_dim(0)


def test_sign_factors_vanish_at_roots():
    k = CurvatureConstants.for_dim(3)
    assert f_snr(k.alpha1 / 2.0, 2.0, 3) == 0.0
    assert f_snr(k.alpha2 / 2.0, 2.0, 3) == 0.0
    assert f_noise(k.beta2 * 0.5, 0.5, 3) == 0.0
    assert f_snr(0.0, 1.0, 1) == pytest.approx(-1.0)
    with pytest.raises(PreconditionError):
        f_snr(1.0, 0.0, 2)


def _five_point(fn, at, h):
    return (-fn(at + 2 * h) + 16 * fn(at + h) - 30 * fn(at) + 16 * fn(at - h) - fn(at - 2 * h)) / (12 * h * h)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
@pytest.mark.parametrize("r", [0.3, 1.0, 2.0])
@pytest.mark.parametrize("p", [0.5, 2.0, 8.0])
def test_analytic_derivatives_match_numerical(n, r, p):
    x = r * np.ones(n) / math.sqrt(n)
    t = r * r
    snr = _five_point(lambda g: float(noise_pdf(x, 1.0 / g)), p, 2e-3 * p)
    snr_scale = float(noise_pdf(x, 1.0 / p)) * (t + (n + 3) / p) ** 2
    assert float(d2_pdf_dsnr(x, p)) == pytest.approx(snr, rel=1e-5, abs=1e-7 * snr_scale)

    q = p / 4.0
    noise = _five_point(lambda v: float(noise_pdf(x, v)), q, 2e-3 * q)
    noise_scale = float(noise_pdf(x, q)) * (t + (n + 3) * q) ** 2 / q**4
    assert float(d2_pdf_dnoise(x, q)) == pytest.approx(noise, rel=1e-5, abs=1e-7 * noise_scale)


def test_two_power_prefactor_only_matches_in_four_dimensions():
    def two_power(x, P):
        n = x.shape[-1]
        k = CurvatureConstants.for_dim(n)
        t = float(np.sum(x * x))
        return (
            (1.0 / (2 * math.pi * P)) ** 2
            * math.exp(-t / (2 * P))
            * (t - k.beta1 * P)
            * (t - k.beta2 * P)
            / (4 * P**4)
        )

    x4, x2 = np.full(4, 0.5), np.full(2, 0.5)
    assert two_power(x4, 0.7) == pytest.approx(float(d2_pdf_dnoise(x4, 0.7)), rel=1e-12)
    assert two_power(x2, 0.7) != pytest.approx(float(d2_pdf_dnoise(x2, 0.7)), rel=1e-3)


def test_estimate_sign_rules():
    assert CurvatureEstimate(1.0, 0.1, 10, "snr", 1.0).sign == "+"
    assert CurvatureEstimate(-1.0, 0.1, 10, "snr", 1.0).verdict == "concave"
    assert CurvatureEstimate(0.2, 0.1, 10, "snr", 1.0).sign == "0"
    assert CurvatureEstimate(0.3, 0.1, 10, "snr", 1.0).sign == "0"
    assert CurvatureEstimate(0.0, 0.0, 10, "snr", 1.0).verdict == "indeterminate"


def test_bpsk_curvature_matches_closed_form(bpsk_c):
    assert oracle_d2_snr("bpsk", 1.0) == pytest.approx(0.1209853622595717, rel=1e-9)
    est = pep_d2_snr_mc(bpsk_c, 0, 1, 1.0, SAMPLES, 2024)
    assert _within(est, oracle_d2_snr("bpsk", 1.0))


def test_bpsk_noise_curvature_matches_chain_rule(bpsk_c):
    est = pep_d2_noise_mc(bpsk_c, 0, 1, 0.5, SAMPLES, 2024)
    assert _within(est, oracle_d2_noise("bpsk", 0.5))


@pytest.mark.parametrize("gamma", [1.0, 4.0])
def test_qpsk_curvature_matches_closed_form(qpsk_c, gamma):
    est = ser_d2_snr_mc(qpsk_c, gamma, SAMPLES, 7)
    assert _within(est, oracle_d2_snr("qpsk", gamma))


def test_weights_integrate_to_zero(qam16_c):
    # d²/dγ² of a total probability is zero
    ones = {0: np.ones(qam16_c.size)}
    for axis, value in (("snr", 3.0), ("noise_power", 0.4)):
        est = curvature_mc(qam16_c, ones, axis, value, SAMPLES, 1)
        assert _within(est, 0.0)


def test_qam16_pair_signs(qam16_c):
    low = pep_d2_snr_mc(qam16_c, 6, 5, 2.0, 200_000, 2024)
    high = pep_d2_snr_mc(qam16_c, 6, 5, 45.0, 200_000, 2024)
    assert low.sign == "-"
    assert high.sign == "+"


def test_curvature_metric_agrees_with_wrapper(qam16_c):
    metric = curvature_metric(qam16_c, Target("ser", i=5), "snr")
    assert metric(3.0, 20_000, 4) == ser_point_d2_snr_mc(qam16_c, 5, 3.0, 20_000, 4)


def test_finite_difference_of_closed_form():
    est = finite_diff_d2(lambda g, s: oracle_ser("bpsk", g), 1.0, h=1e-2)
    assert est.std_err == 0.0
    assert est.value == pytest.approx(oracle_d2_snr("bpsk", 1.0), abs=1e-4)


def test_finite_difference_agrees_with_direct_estimate(bpsk_c):
    def metric(g, seed):
        return pep_mc(bpsk_c, 0, 1, channel_at("snr", g), SAMPLES, seed)

    fd = finite_diff_d2(metric, 1.0, h=0.2, seed=3)
    direct = pep_d2_snr_mc(bpsk_c, 0, 1, 1.0, SAMPLES, 3)
    assert abs(fd.value - direct.value) <= 4 * math.hypot(fd.std_err, direct.std_err)


def test_finite_difference_rejects_bad_steps():
    with pytest.raises(PreconditionError):
        finite_diff_d2(lambda g, s: g, 1.0, h=0.0)
    with pytest.raises(PreconditionError):
        finite_diff_d2(lambda g, s: g, 0.1, h=0.2)


def test_bad_inputs(bpsk_c):
    with pytest.raises(PreconditionError):
        pep_d2_snr_mc(bpsk_c, 0, 0, 1.0, 1000, 0)
    with pytest.raises(PreconditionError):
        pep_d2_snr_mc(bpsk_c, 0, 1, -1.0, 1000, 0)
    with pytest.raises(UsageError):
        curvature_mc(bpsk_c, {0: np.ones(2)}, "power", 1.0, 1000, 0)
    with pytest.raises(ValidationError):
        oracle_d2_snr("qam16", 1.0)
