"""Variance, SEM, t quantiles, and confidence intervals.

The t machinery is checked against a brute-force oracle that never touches
the library's incomplete-beta path: the t density is integrated with
adaptive quadrature and the CDF inverted by bisection.
"""

import math
from functools import lru_cache

import mpmath
import numpy as np
import pytest
from scipy import integrate, special

from ablate_ci import (
    InsufficientSamplesError,
    InvalidArgumentError,
    confidence_interval,
    mle_variance,
    normal_quantile,
    sem,
    student_t_cdf,
    t_quantile,
    unbiased_variance,
)
from ablate_ci.uncertainty import regularized_incomplete_beta

# standard normal 97.5% quantile, frozen reference
Z_975 = 1.959963984540054


# ---------------------------------------------------------------------------
# independent oracle: quadrature of the t density + bisection
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def t_log_norm(df: int) -> float:
    # the loggamma difference cancels catastrophically in float64 for huge
    # df, so evaluate the normalization constant in high precision
    with mpmath.workdps(40):
        value = (
            mpmath.loggamma((df + 1) / mpmath.mpf(2))
            - mpmath.loggamma(df / mpmath.mpf(2))
            - mpmath.mpf(0.5) * mpmath.log(df * mpmath.pi)
        )
        return float(value)


def t_density(x: float, df: int) -> float:
    return math.exp(t_log_norm(df) - ((df + 1) / 2.0) * math.log1p(x * x / df))


def oracle_t_cdf(t: float, df: int) -> float:
    half, _ = integrate.quad(
        t_density, 0.0, abs(t), args=(df,), epsabs=1e-13, epsrel=1e-13, limit=500
    )
    return 0.5 + math.copysign(half, t)


def oracle_t_quantile(p: float, df: int) -> float:
    if p == 0.5:
        return 0.0
    if p < 0.5:
        return -oracle_t_quantile(1.0 - p, df)
    lo, hi = 0.0, 1.0
    while oracle_t_cdf(hi, df) < p:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if oracle_t_cdf(mid, df) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------


class TestIncompleteBeta:
    def test_bounds(self):
        assert regularized_incomplete_beta(2.0, 3.0, 0.0) == 0.0
        assert regularized_incomplete_beta(2.0, 3.0, 1.0) == 1.0

    def test_against_scipy_grid(self):
        rng = np.random.default_rng(31)
        for _ in range(200):
            a = float(rng.uniform(0.1, 50.0))
            b = float(rng.uniform(0.1, 50.0))
            x = float(rng.uniform(0.0, 1.0))
            assert regularized_incomplete_beta(a, b, x) == pytest.approx(
                float(special.betainc(a, b, x)), abs=1e-12, rel=1e-10
            )

    def test_rejects_bad_arguments(self):
        with pytest.raises(InvalidArgumentError):
            regularized_incomplete_beta(0.0, 1.0, 0.5)
        with pytest.raises(InvalidArgumentError):
            regularized_incomplete_beta(1.0, 1.0, 1.5)


class TestStudentTCdf:
    def test_median_is_half(self):
        for df in (1, 3, 50):
            assert student_t_cdf(0.0, df) == 0.5

    def test_matches_quadrature_oracle(self):
        for df in (1, 2, 5, 10, 30, 100):
            for t in (-5.0, -1.0, -0.2, 0.3, 1.0, 2.5, 8.0):
                assert student_t_cdf(t, df) == pytest.approx(
                    oracle_t_cdf(t, df), abs=1e-10
                )


class TestTQuantile:
    def test_median_exactly_zero(self):
        for df in (1, 2, 7, 1000):
            assert t_quantile(0.5, df) == 0.0

    def test_large_df_approaches_normal_1_96(self):
        q = t_quantile(0.975, 10**6)
        assert abs(q - 1.96) < 1e-3

    def test_df_10_against_oracle(self):
        assert t_quantile(0.975, 10) == pytest.approx(
            oracle_t_quantile(0.975, 10), abs=1e-8
        )

    @pytest.mark.parametrize("df", [1, 2, 5, 10, 30, 100, 10**6])
    @pytest.mark.parametrize("p", [0.6, 0.9, 0.975, 0.99])
    def test_oracle_agreement_grid(self, p, df):
        mine = t_quantile(p, df)
        ref = oracle_t_quantile(p, df)
        assert mine == pytest.approx(ref, abs=1e-8, rel=1e-9)

    def test_antisymmetry(self):
        for df in (1, 4, 29):
            for p in (0.01, 0.2, 0.45, 0.8, 0.999):
                assert t_quantile(p, df) == pytest.approx(
                    -t_quantile(1.0 - p, df), abs=1e-8
                )

    def test_monotone_in_p(self):
        qs = [t_quantile(p, 6) for p in (0.55, 0.7, 0.9, 0.99, 0.9999)]
        assert all(a < b for a, b in zip(qs, qs[1:]))

    def test_validation(self):
        with pytest.raises(InvalidArgumentError):
            t_quantile(0.0, 5)
        with pytest.raises(InvalidArgumentError):
            t_quantile(1.0, 5)
        with pytest.raises(InvalidArgumentError):
            t_quantile(0.9, 0)


class TestVarianceAndSem:
    def test_constant_samples_zero_variance(self):
        assert mle_variance(np.array([3.0, 3.0, 3.0])) == 0.0
        assert sem(np.array([3.0, 3.0, 3.0])) == 0.0

    def test_divide_by_n_fidelity(self):
        # the n divisor gives 1.0; the n-1 divisor would give 2.0
        samples = np.array([0.0, 2.0])
        assert mle_variance(samples) == 1.0
        assert unbiased_variance(samples) == 2.0

    def test_sem_of_two_points(self):
        assert sem(np.array([0.0, 2.0])) == pytest.approx(
            math.sqrt(0.5), rel=1e-15
        )

    def test_scaling_homogeneity(self):
        rng = np.random.default_rng(33)
        x = rng.normal(size=40)
        for s in (0.1, 3.0, 250.0):
            assert mle_variance(s * x) == pytest.approx(
                s * s * mle_variance(x), rel=1e-12
            )

    def test_duplication_shrinks_sem_by_sqrt2(self):
        x = np.array([0.0, 2.0])
        doubled = np.array([0.0, 2.0, 0.0, 2.0])
        assert sem(doubled) == pytest.approx(sem(x) / math.sqrt(2.0), rel=1e-15)

    def test_empty_input_rejected(self):
        with pytest.raises(InvalidArgumentError):
            mle_variance(np.array([]))
        with pytest.raises(InsufficientSamplesError):
            unbiased_variance(np.array([1.0]))


class TestConfidenceInterval:
    def test_degenerate_zero_sem(self):
        ci = confidence_interval(np.full(10, 4.25), level=0.95)
        assert (ci.point, ci.ci_low, ci.ci_high) == (4.25, 4.25, 4.25)

    def test_two_point_normal_interval(self):
        ci = confidence_interval(np.array([0.0, 2.0]), level=0.95, method="normal")
        half = Z_975 * math.sqrt(0.5)
        assert ci.point == 1.0
        assert ci.sem == pytest.approx(math.sqrt(0.5), rel=1e-15)
        assert ci.ci_low == pytest.approx(1.0 - half, rel=1e-12)
        assert ci.ci_high == pytest.approx(1.0 + half, rel=1e-12)

    def test_higher_level_strictly_widens(self):
        rng = np.random.default_rng(34)
        x = rng.normal(size=30)
        ci95 = confidence_interval(x, level=0.95)
        ci99 = confidence_interval(x, level=0.99)
        assert ci99.ci_low < ci95.ci_low
        assert ci99.ci_high > ci95.ci_high
        # nesting
        assert ci99.ci_low <= ci95.ci_low <= ci95.ci_high <= ci99.ci_high

    def test_symmetry_about_point(self):
        rng = np.random.default_rng(35)
        for _ in range(20):
            x = rng.normal(size=int(rng.integers(2, 40)))
            ci = confidence_interval(x, level=float(rng.uniform(0.5, 0.999)))
            width = ci.ci_high - ci.ci_low
            assert abs((ci.ci_high - ci.point) - (ci.point - ci.ci_low)) <= max(
                1e-12 * width, 1e-300
            )

    def test_student_t_never_narrower_than_normal(self):
        rng = np.random.default_rng(36)
        for n in (2, 5, 20, 200):
            x = rng.normal(size=n)
            t_ci = confidence_interval(x, level=0.95, method="student_t")
            n_ci = confidence_interval(x, level=0.95, method="normal")
            assert (t_ci.ci_high - t_ci.ci_low) >= (n_ci.ci_high - n_ci.ci_low)

    def test_t_close_to_normal_for_n_100(self):
        rng = np.random.default_rng(37)
        for n in (100, 250, 1000):
            x = rng.normal(size=n)
            t_half = t_quantile(0.975, n - 1) * sem(x)
            n_half = normal_quantile(0.975) * sem(x)
            if n_half > 0:
                assert abs(t_half - n_half) / n_half < 0.025

    def test_unbiased_variance_widens_interval(self):
        x = np.array([0.0, 1.0, 2.0, 5.0])
        mle_ci = confidence_interval(x, variance="mle")
        unb_ci = confidence_interval(x, variance="unbiased")
        assert (unb_ci.ci_high - unb_ci.ci_low) > (mle_ci.ci_high - mle_ci.ci_low)

    def test_validation(self):
        with pytest.raises(InsufficientSamplesError):
            confidence_interval(np.array([1.0]))
        with pytest.raises(InvalidArgumentError):
            confidence_interval(np.array([1.0, 2.0]), level=1.0)
        with pytest.raises(InvalidArgumentError):
            confidence_interval(np.array([1.0, 2.0]), method="bootstrap")


def test_normal_quantile_reference_points():
    assert normal_quantile(0.5) == 0.0
    assert normal_quantile(0.975) == pytest.approx(Z_975, abs=1e-9)
    assert normal_quantile(0.025) == pytest.approx(-Z_975, abs=1e-9)
