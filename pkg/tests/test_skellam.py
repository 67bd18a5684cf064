import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from garch_intensity import SkellamParams, bessel_i, log_bessel_i, skellam_log_pmf, skellam_pmf


def bessel_series_oracle(order, x, kmax=40):
    """Truncated power series; terms beyond k=40 are below 1e-18 for x <= 2."""
    return sum((x / 2.0) ** (2 * k + order) / (math.factorial(k) * math.gamma(k + order + 1.0))
               for k in range(kmax + 1))


def test_bessel_trivial_values():
    assert bessel_i(0, 0.0) == 1.0
    assert bessel_i(1, 0.0) == 0.0
    assert bessel_i(7, 0.0) == 0.0


def test_bessel_small_argument_matches_series_oracle():
    assert bessel_i(0, 2.0) == pytest.approx(2.2795853023360673, rel=1e-12)
    assert bessel_i(0, 2.0) == pytest.approx(bessel_series_oracle(0, 2.0), rel=1e-12)
    for order in (0, 1, 2, 5, 9):
        for x in (0.05, 0.7, 2.0, 5.0):
            assert bessel_i(order, x) == pytest.approx(
                bessel_series_oracle(order, x), rel=1e-12)


def test_bessel_against_scipy_across_magnitudes():
    import scipy.special as sp

    for order in (0, 1, 3, 10, 40):
        for x in (0.3, 7.0, 31.0, 120.0, 400.0, 650.0):
            assert bessel_i(order, x) == pytest.approx(float(sp.iv(order, x)), rel=1e-11)
    # beyond overflow, compare exponentially scaled values through the log form
    for order in (0, 2, 15):
        for x in (800.0, 5000.0, 40000.0):
            scaled = math.exp(log_bessel_i(order, x) - x)
            assert scaled == pytest.approx(float(sp.ive(order, x)), rel=1e-10)


def test_bessel_rejects_bad_arguments():
    with pytest.raises(ValueError):
        bessel_i(0, -1.0)
    with pytest.raises(ValueError):
        bessel_i(-1, 1.0)
    with pytest.raises(ValueError):
        bessel_i(0, math.inf)


def test_bessel_overflow_is_inf_not_error():
    assert bessel_i(0, 800.0) == math.inf
    assert math.isfinite(log_bessel_i(0, 800.0))


def test_pmf_matches_brute_force_convolution(skellam_oracle):
    lams = (0.3, 1.0, 3.0)
    for lp in lams:
        for lm in lams:
            p = SkellamParams(lp, lm)
            for m in range(-10, 11):
                assert skellam_pmf(m, p) == pytest.approx(
                    skellam_oracle(m, lp, lm), abs=1e-12)


def test_pmf_frozen_values(skellam_oracle):
    # frozen from the convolution oracle
    assert skellam_pmf(0, SkellamParams(1.0, 1.0)) == pytest.approx(
        0.30850832255367105, rel=1e-12)
    assert skellam_pmf(1, SkellamParams(2.0, 1.0)) == pytest.approx(
        0.23846343848629703, rel=1e-12)


def test_pmf_symmetry_exact():
    assert skellam_pmf(2, SkellamParams(1.5, 0.5)) == skellam_pmf(-2, SkellamParams(0.5, 1.5))


def test_pmf_normalization_and_moments():
    for lp, lm in [(1.0, 1.0), (3.0, 7.0), (10.0, 10.0), (12.0, 8.0)]:
        p = SkellamParams(lp, lm)
        ms = range(-200, 201)
        pmf = [skellam_pmf(m, p) for m in ms]
        total = math.fsum(pmf)
        mean = math.fsum(m * q for m, q in zip(ms, pmf))
        second = math.fsum(m * m * q for m, q in zip(ms, pmf))
        assert total == pytest.approx(1.0, abs=1e-10)
        assert mean == pytest.approx(lp - lm, abs=1e-8)
        assert second - mean ** 2 == pytest.approx(lp + lm, abs=1e-8)


def test_log_pmf_consistent_with_pmf():
    for lp, lm in [(0.5, 2.0), (20.0, 25.0), (1000.0, 900.0)]:
        p = SkellamParams(lp, lm)
        for m in (-40, -3, 0, 1, 17):
            pmf = skellam_pmf(m, p)
            if pmf > 1e-280:
                assert math.exp(skellam_log_pmf(m, p)) == pytest.approx(pmf, rel=1e-12)


def test_log_pmf_finite_at_large_intensities():
    # the direct product form overflows here; the log form must not
    p = SkellamParams(2000.0, 1800.0)
    v = skellam_log_pmf(100, p)
    assert math.isfinite(v)
    import scipy.stats as stats

    assert v == pytest.approx(float(stats.skellam.logpmf(100, 2000.0, 1800.0)), rel=1e-9)


def test_params_validation():
    with pytest.raises(ValueError):
        SkellamParams(0.0, 1.0)
    with pytest.raises(ValueError):
        SkellamParams(1.0, -2.0)
    with pytest.raises(ValueError):
        SkellamParams(1.0, math.nan)


@given(lp=st.floats(0.05, 50.0), lm=st.floats(0.05, 50.0), m=st.integers(-30, 30))
@settings(max_examples=60, deadline=None)
def test_pmf_symmetry_property(lp, lm, m):
    assert skellam_pmf(m, SkellamParams(lp, lm)) == pytest.approx(
        skellam_pmf(-m, SkellamParams(lm, lp)), rel=1e-13)


@given(lp=st.floats(0.05, 50.0), lm=st.floats(0.05, 50.0), m=st.integers(-30, 30))
@settings(max_examples=60, deadline=None)
def test_pmf_is_a_probability(lp, lm, m):
    v = skellam_pmf(m, SkellamParams(lp, lm))
    assert 0.0 <= v < 1.0
