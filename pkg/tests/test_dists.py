"""Tests for the reference quantiles and the mixture sampler."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from hdsplit.dists import (
    chisq_cdf,
    chisq_quantile,
    kf_quantile,
    normal_cdf,
    normal_quantile,
    weighted_chisq_sample,
)

ROUND_TRIP_TOL = 1e-8
PRINTED_TOL = 1e-5

# degrees of freedom sweep covering the fractional, small, and large regimes
DF_GRID = (0.5, 1.0, 2.7, 10.0, 100.0)
LEVELS = (1e-4, 0.01, 0.5, 0.99, 1.0 - 1e-4)


class TestNormalQuantile:
    def test_median_and_upper_tail(self):
        assert normal_quantile(0.5) == 0.0
        assert_allclose(normal_quantile(0.95), 1.6448536269514722, rtol=1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(41)
        for p in rng.uniform(1e-6, 1 - 1e-6, size=20):
            assert_allclose(normal_quantile(p), -normal_quantile(1.0 - p), atol=1e-10)

    def test_cdf_round_trip(self):
        for p in LEVELS:
            assert_allclose(float(normal_cdf(normal_quantile(p))), p, atol=ROUND_TRIP_TOL)

    def test_level_bounds(self):
        for bad in (0.0, 1.0, -0.2, 1.7):
            with pytest.raises(ValueError, match="level"):
                normal_quantile(bad)


class TestChisqQuantile:
    """Real-df chi-square quantiles via the regularized gamma inverse."""

    def test_exponential_special_case(self):
        # with two degrees of freedom the CDF is 1 - exp(-x/2)
        assert_allclose(chisq_quantile(1.0 - np.exp(-1.0), 2.0), 2.0, atol=1e-10)

    def test_printed_value(self):
        assert_allclose(chisq_quantile(0.95, 1.0), 3.84146, atol=PRINTED_TOL)

    def test_cdf_round_trip_over_grid(self):
        for df in DF_GRID:
            for p in LEVELS:
                x = chisq_quantile(p, df)
                assert_allclose(float(chisq_cdf(x, df)), p, atol=ROUND_TRIP_TOL)

    def test_df_validation(self):
        with pytest.raises(ValueError, match="degrees of freedom"):
            chisq_quantile(0.5, 0.0)
        with pytest.raises(ValueError):
            chisq_cdf(1.0, -1.0)


class TestKfQuantile:
    """Centred-and-scaled chi-square thresholds."""

    def test_printed_value_at_one_df(self):
        assert_allclose(kf_quantile(0.95, 1.0), 2.00921, rtol=0.0, atol=PRINTED_TOL)

    def test_matches_direct_transform(self):
        for df in DF_GRID:
            direct = (chisq_quantile(0.9, df) - df) / np.sqrt(2.0 * df)
            assert_allclose(kf_quantile(0.9, df), direct, rtol=1e-12)

    def test_normal_limit(self):
        assert abs(kf_quantile(0.95, 1e6) - normal_quantile(0.95)) < 3e-3

    def test_decays_to_the_normal_limit_beyond_small_df(self):
        # the upper quantile peaks near df = 1.4 and then falls toward
        # the normal threshold
        grid = np.geomspace(2.0, 1e6, 40)
        vals = [kf_quantile(0.95, df) for df in grid]
        assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))
        assert vals[-1] > normal_quantile(0.95)

    def test_transform_is_centred(self):
        rng = np.random.default_rng(45)
        for df in (1.0, 7.0, 120.0):
            draws = (rng.chisquare(df, size=1_000_000) - df) / np.sqrt(2.0 * df)
            assert abs(draws.mean()) < 3e-3

    def test_continuity_in_df(self):
        for df in (1.0, 3.3, 80.0):
            a = kf_quantile(0.95, df)
            b = kf_quantile(0.95, df * (1.0 + 1e-9))
            assert abs(a - b) < 1e-6


class TestWeightedChisqSample:
    """Draws of the standardized weighted chi-square mixture."""

    def test_single_weight_moments(self):
        rng = np.random.default_rng(42)
        draws = weighted_chisq_sample((1.0,), 1_000_000, rng)
        assert abs(draws.mean()) < 0.01
        assert abs(draws.var() - 1.0) < 0.02

    def test_empty_weights_reduce_to_normal(self):
        draws = weighted_chisq_sample((), 512, np.random.default_rng(5))
        reference = np.random.default_rng(5).standard_normal(512)
        assert np.array_equal(draws, reference)

    def test_many_equal_weights_symmetrize(self):
        w = np.full(100, 0.1)
        draws = weighted_chisq_sample(w, 100_000, np.random.default_rng(43))
        assert abs(draws.mean()) < 0.02
        assert abs(draws.var() - 1.0) < 0.03
        skew = float(np.mean(((draws - draws.mean()) / draws.std()) ** 3))
        assert abs(skew) < 0.3

    def test_partial_weights_backfilled_by_normal(self):
        w = (0.6,)
        draws = weighted_chisq_sample(w, 200_000, np.random.default_rng(44))
        assert abs(draws.mean()) < 0.01
        assert abs(draws.var() - 1.0) < 0.02

    def test_overweight_rejected(self):
        with pytest.raises(ValueError, match="norm"):
            weighted_chisq_sample((0.9, 0.9), 10, np.random.default_rng(0))

    def test_count_validation(self):
        with pytest.raises(ValueError):
            weighted_chisq_sample((1.0,), 0, np.random.default_rng(0))
