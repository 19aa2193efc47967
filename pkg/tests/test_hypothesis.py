"""Tests for projection construction and structural validation."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from hdsplit.hypothesis import (
    BlockMatrix,
    canned_scenario,
    projection_from_h,
    scenario_a_matrix,
    scenario_b_matrix,
    validate_hypothesis,
)
from hdsplit.linalg import max_abs, sym_eigen
from hdsplit.model import StudyDesign

PROJECTION_TOL = 1e-10
MIXING_TOL = 1e-8


def _design(dims, sizes=None):
    return StudyDesign(dims=dims, sizes=sizes or tuple(4 for _ in dims))


class TestBlockMatrix:
    """Block addressing over the stacked dimension."""

    def test_block_slicing(self):
        design = _design((2, 3))
        m = BlockMatrix(design, np.arange(25.0).reshape(5, 5))
        assert m.block(1, 1).shape == (2, 2)
        assert m.block(1, 2).shape == (2, 3)
        assert_allclose(m.block(2, 1), m.data[2:, :2])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="design needs D"):
            BlockMatrix(_design((2, 2)), np.eye(5))


class TestProjectionFromH:
    """T = H^T (H H^T)^+ H."""

    def test_identity_rows(self):
        t = projection_from_h(np.eye(3), _design((1, 2)))
        assert_allclose(t.data, np.eye(3), atol=PROJECTION_TOL)

    def test_single_contrast(self):
        t = projection_from_h(np.array([[1.0, -1.0]]), _design((1, 1)))
        assert_allclose(t.data, [[0.5, -0.5], [-0.5, 0.5]], atol=PROJECTION_TOL)

    def test_row_scaling_invariance(self):
        h = np.array([[1.0, -1.0, 0.0], [0.0, 1.0, -1.0]])
        design = _design((1, 2))
        t1 = projection_from_h(h, design)
        t2 = projection_from_h(3.0 * h, design)
        assert max_abs(t1.data - t2.data) <= PROJECTION_TOL

    def test_row_mixing_invariance(self):
        rng = np.random.default_rng(21)
        design = _design((3, 4))
        for _ in range(8):
            h = rng.standard_normal((3, 7))
            mix = rng.standard_normal((3, 3)) + 3.0 * np.eye(3)
            t1 = projection_from_h(h, design)
            t2 = projection_from_h(mix @ h, design)
            assert max_abs(t1.data - t2.data) <= MIXING_TOL

    def test_always_a_projection(self):
        rng = np.random.default_rng(22)
        design = _design((2, 3))
        for rows in (1, 3, 8):
            h = rng.standard_normal((rows, 5))
            t = projection_from_h(h, design).data
            assert max_abs(t - t.T) <= PROJECTION_TOL
            assert max_abs(t @ t - t) <= MIXING_TOL

    def test_wrong_width(self):
        with pytest.raises(ValueError, match="columns"):
            projection_from_h(np.ones((1, 4)), _design((1, 2)))


class TestScenarioB:
    """Rank-one comparison of the two groups' coordinate averages."""

    def test_scalar_groups(self):
        t = scenario_b_matrix(_design((1, 1)))
        assert_allclose(t.data, [[0.5, -0.5], [-0.5, 0.5]], atol=PROJECTION_TOL)

    def test_rank_one_unit_trace(self):
        t = scenario_b_matrix(_design((3, 5)))
        vals, _ = sym_eigen(t.data)
        assert_allclose(np.trace(t.data), 1.0, atol=PROJECTION_TOL)
        assert_allclose(vals[0], 1.0, atol=PROJECTION_TOL)
        assert max_abs(vals[1:]) <= PROJECTION_TOL

    def test_fixes_contrast_direction(self):
        d1, d2 = 3, 5
        t = scenario_b_matrix(_design((d1, d2)))
        v = np.concatenate([np.full(d1, 1.0 / d1), np.full(d2, -1.0 / d2)])
        assert_allclose(t.data @ v, v, atol=PROJECTION_TOL)

    def test_two_groups_only(self):
        with pytest.raises(ValueError):
            scenario_b_matrix(_design((2, 2, 2)))


class TestScenarioA:
    """Within-group centering projections on the diagonal."""

    def test_explicit_small_case(self):
        t = scenario_a_matrix(_design((2, 2)))
        block = np.array([[0.5, -0.5], [-0.5, 0.5]])
        expected = np.zeros((4, 4))
        expected[:2, :2] = block
        expected[2:, 2:] = block
        assert_allclose(t.data, expected, atol=PROJECTION_TOL)

    def test_trace_counts_constraints(self):
        t = scenario_a_matrix(_design((4, 7)))
        assert_allclose(np.trace(t.data), 11 - 2, atol=PROJECTION_TOL)

    def test_kills_groupwise_constants(self):
        t = scenario_a_matrix(_design((3, 4)))
        flat = np.concatenate([np.full(3, 2.0), np.full(4, -1.5)])
        assert max_abs(t.data @ flat) <= PROJECTION_TOL

    def test_scalar_group_rejected(self):
        with pytest.raises(ValueError):
            scenario_a_matrix(_design((1, 4)))


class TestValidateHypothesis:
    """Symmetry, idempotence, and rank reporting."""

    def test_identity_passes(self):
        report = validate_hypothesis(np.eye(6))
        assert report.passed
        assert report.rank == 6
        assert report.max_asymmetry == 0.0

    def test_all_ones_fails_idempotence(self):
        report = validate_hypothesis(np.ones((2, 2)))
        assert not report.passed
        assert_allclose(report.max_idempotence_defect, 1.0)
        assert "FAIL" in str(report)

    def test_scenario_b_passes_rank_one(self):
        t = scenario_b_matrix(_design((2, 3)))
        report = validate_hypothesis(t)
        assert report.passed
        assert report.rank == 1

    def test_asymmetry_detected(self):
        m = np.eye(3)
        m[0, 1] = 1e-6
        assert not validate_hypothesis(m).passed

    def test_accepts_block_matrix_and_plain_array(self):
        t = scenario_a_matrix(_design((2, 2)))
        assert validate_hypothesis(t).passed
        assert validate_hypothesis(t.data).passed


class TestCannedScenario:
    """Covariance pairing behind the scenario labels."""

    def test_label_a_equicorrelation(self):
        spec = canned_scenario("A", _design((2, 3)))
        assert all(c.kind == "compound_symmetry" for c in spec.covariances)
        assert spec.matrix().data.shape == (5, 5)

    def test_label_b_autoregressive_pair(self):
        spec = canned_scenario("B", _design((2, 3)), rho=0.4)
        assert spec.covariances[0].kind == "ar"
        assert spec.covariances[1].kind == "scaled_ar"
        assert spec.covariances[0].rho == 0.4

    def test_unknown_label(self):
        with pytest.raises(ValueError, match="scenario"):
            canned_scenario("C", _design((2, 2)))
