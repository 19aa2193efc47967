"""Tests for the standardized test procedure and its decision rules."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from hdsplit.dists import chisq_quantile, normal_quantile
from hdsplit.errors import DegenerateVarianceError
from hdsplit.estimators import TraceEstimates
from hdsplit.hypothesis import BlockMatrix, canned_scenario
from hdsplit.inference import (
    EstimatorConfig,
    critical_value,
    fp_regime_diagnostic,
    run_test,
    w_statistic,
)
from hdsplit.model import StudyDesign, replication_streams, sample
from hdsplit.moments import (
    build_vn,
    exact_moments,
    q_statistic,
    standardized_statistic,
)

ORACLE_MATCH_TOL = 1e-12


def _scenario(dims, sizes, label="B"):
    design = StudyDesign(dims=dims, sizes=sizes)
    spec = canned_scenario(label, design)
    return design, spec, spec.matrix(), build_vn(design, spec.covariances)


class TestWStatistic:
    def test_zero_at_the_mean(self):
        traces = TraceEstimates(5.0, 2.0, None, family="A")
        assert w_statistic(5.0, traces) == 0.0

    def test_unit_step(self):
        traces = TraceEstimates(5.0, 2.0, None, family="A")
        assert_allclose(w_statistic(5.0 + 2.0, traces), 1.0)

    def test_matches_exact_standardization(self):
        rng = np.random.default_rng(111)
        design, spec, t, vn = _scenario((3, 4), (8, 9))
        mean, var = exact_moments(t, vn)
        traces = TraceEstimates(mean, var / 2.0, None, family="exact")
        for _ in range(5):
            data = sample(design, None, spec.covariances, rng)
            q = q_statistic(data, t)
            assert_allclose(
                w_statistic(q, traces),
                standardized_statistic(q, mean, var),
                atol=ORACLE_MATCH_TOL,
            )

    def test_non_positive_variance(self):
        with pytest.raises(DegenerateVarianceError):
            w_statistic(1.0, TraceEstimates(1.0, 0.0, None, family="A"))
        with pytest.raises(DegenerateVarianceError):
            w_statistic(1.0, TraceEstimates(1.0, None, None, family="A"))


class TestCriticalValue:
    """Thresholds on the standardized scale."""

    def test_normal_rule(self):
        assert_allclose(critical_value("z", 0.05), normal_quantile(0.95), rtol=1e-12)

    def test_single_df_rule(self):
        expected = (chisq_quantile(0.95, 1.0) - 1.0) / np.sqrt(2.0)
        assert_allclose(critical_value("chi1", 0.05), expected, rtol=1e-12)

    def test_matched_df_rule_interpolates(self):
        # at one degree of freedom the kf threshold IS the chi1 threshold
        assert critical_value("kf", 0.05, 1.0) == critical_value("chi1", 0.05)
        assert abs(critical_value("kf", 0.05, 1e6) - critical_value("z", 0.05)) < 3e-3

    def test_thresholds_decrease_in_alpha(self):
        for rule, extra in (("z", None), ("chi1", None), ("kf", 7.0)):
            values = [critical_value(rule, a, extra) for a in (0.01, 0.05, 0.1, 0.2)]
            assert all(b < a for a, b in zip(values, values[1:]))

    def test_validation(self):
        with pytest.raises(ValueError, match="kf"):
            critical_value("kf", 0.05)
        with pytest.raises(ValueError, match="rule"):
            critical_value("bonferroni", 0.05)
        with pytest.raises(ValueError, match="alpha"):
            critical_value("z", 0.0)


class TestRegimeDiagnostic:
    def test_bands(self):
        assert fp_regime_diagnostic(1.0) == "near_chi1"
        assert fp_regime_diagnostic(1_000_000.0) == "near_normal"
        assert fp_regime_diagnostic(7.3) == "intermediate"

    def test_floor_enforced(self):
        with pytest.raises(ValueError):
            fp_regime_diagnostic(0.5)


class TestEstimatorConfig:
    def test_default_policy_scales_with_total_size(self):
        config = EstimatorConfig()
        assert config.policy("a", 50) == (250, 500, 5000)
        assert config.policy("b", 10) == (50, 100, 1000)

    def test_scalar_broadcast_and_tuple(self):
        assert EstimatorConfig(upsilon_a=7).policy("a", 99) == (7, 7, 7)
        assert EstimatorConfig(upsilon1=(1, 2, 3)).policy("b", 99) == (1, 2, 3)

    def test_tuple_length_checked(self):
        with pytest.raises(ValueError):
            EstimatorConfig(upsilon_a=(1, 2)).policy("a", 10)

    def test_tuples_per_perm_default(self):
        assert EstimatorConfig().tuples_per_perm == 10
        assert EstimatorConfig(upsilon2=4).tuples_per_perm == 4


class TestRunTest:
    """End-to-end behavior of the single-dataset procedure."""

    def test_oracle_report_is_internally_consistent(self):
        design, spec, t, vn = _scenario((3, 3), (20, 20))
        data = sample(design, None, spec.covariances, np.random.default_rng(121))
        report = run_test(data, t, flavor="oracle", vn=vn, seed=1)
        assert report.flavor == "oracle"
        assert set(report.decisions) == {"z", "chi1", "kf"}
        for rule, bound in report.quantiles.items():
            expected = "reject" if report.statistic > bound else "retain"
            assert report.decisions[rule] == expected

    def test_every_flavor_produces_a_report(self):
        design, spec, t, vn = _scenario((2, 2), (6, 7))
        data = sample(design, None, spec.covariances, np.random.default_rng(122))
        config = EstimatorConfig(upsilon_a=30, upsilon1=5, upsilon2=4)
        for flavor in ("A", "Astar", "B", "Bstar"):
            report = run_test(data, t, flavor=flavor, config=config, seed=3)
            assert report.statistic is not None
            assert report.traces.family == flavor
        oracle = run_test(data, t, flavor="oracle", vn=vn)
        assert oracle.traces.family == "exact"

    def test_seeded_runs_reproduce(self):
        design, spec, t, _ = _scenario((2, 2), (8, 8))
        data = sample(design, None, spec.covariances, np.random.default_rng(123))
        a = run_test(data, t, flavor="Bstar", seed=11)
        b = run_test(data, t, flavor="Bstar", seed=11)
        assert a.statistic == b.statistic
        assert a.quantiles == b.quantiles

    def test_small_groups_skip_matched_df_rule(self):
        design, spec, t, _ = _scenario((2, 2), (5, 9))
        data = sample(design, None, spec.covariances, np.random.default_rng(124))
        report = run_test(data, t, flavor="B", seed=5)
        assert "kf" not in report.decisions
        assert set(report.decisions) == {"z", "chi1"}
        assert "6" in report.diagnostic

    def test_degenerate_variance_reported_not_raised(self):
        design = StudyDesign(dims=(2, 2), sizes=(6, 6))
        t = BlockMatrix(design, np.zeros((4, 4)))
        rng = np.random.default_rng(125)
        data = sample(
            design, None, canned_scenario("B", design).covariances, rng
        )
        report = run_test(data, t, flavor="A", seed=2)
        assert report.statistic is None
        assert report.decisions == {}
        assert report.diagnostic is not None

    def test_alpha_validation(self):
        design, spec, t, _ = _scenario((2, 2), (6, 6))
        data = sample(design, None, spec.covariances, np.random.default_rng(126))
        with pytest.raises(ValueError):
            run_test(data, t, alpha=1.0)

    def test_power_against_large_shift(self):
        """All three rules fire almost surely under a strong signal."""
        design, spec, t, vn = _scenario((3, 3), (20, 20))
        shift = [np.full(3, 5.0), None]
        rejected = {"z": 0, "chi1": 0, "kf": 0}
        reps = 200
        for rep in range(reps):
            streams = replication_streams(900, rep, design.a)
            data = sample(design, shift, spec.covariances, streams)
            report = run_test(data, t, flavor="oracle", vn=vn)
            for rule in rejected:
                rejected[rule] += report.rejected(rule)
        for rule, hits in rejected.items():
            assert hits / reps > 0.99

    def test_null_rate_of_matched_df_rule(self):
        """Oracle-flavor kf rejections stay inside the 99% binomial band."""
        design, spec, t, vn = _scenario((3, 3), (10, 10))
        reps = 10_000
        hits = 0
        for rep in range(reps):
            streams = replication_streams(901, rep, design.a)
            data = sample(design, None, spec.covariances, streams)
            hits += run_test(data, t, flavor="oracle", vn=vn).rejected("kf")
        rate = hits / reps
        halfwidth = 2.5758 * np.sqrt(0.05 * 0.95 / reps)
        assert abs(rate - 0.05) <= halfwidth
