"""Hypothesis projections for stacked multi-group mean vectors.

A null hypothesis on the stacked mean vector ``mu`` (length D) is encoded
as ``T mu = 0`` for a symmetric idempotent D x D matrix ``T``. ``T``
carries the design's block structure: sub-block ``T_ij`` couples group i
with group j and satisfies ``T_ij = T_ji^T``.

Two canned two-group constructions are provided: a within-group
flat-profile hypothesis (block-diagonal centering) and a between-group
comparison of the per-group averages (a rank-one projection).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import as_matrix, max_abs, pseudo_inverse, sym_eigen
from .model import CovarianceModel, StudyDesign, ar, compound_symmetry, scaled_ar

SYMMETRY_TOL = 1e-10
IDEMPOTENCE_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class BlockMatrix:
    """A D x D matrix with the design's group-block structure recorded."""

    design: StudyDesign
    data: np.ndarray

    def __post_init__(self):
        d = as_matrix(self.data, square=True)
        if d.shape[0] != self.design.total_dim:
            raise ValueError(
                f"matrix is {d.shape[0]} x {d.shape[0]}, design needs D = {self.design.total_dim}"
            )
        object.__setattr__(self, "data", d)

    def block(self, i: int, j: int) -> np.ndarray:
        """The d_i x d_j sub-block for the (1-based) group pair (i, j)."""
        off = self.design.dim_offsets()
        return self.data[off[i - 1]:off[i], off[j - 1]:off[j]]


@dataclass(frozen=True)
class ValidationReport:
    """Structural check results for a candidate hypothesis matrix."""

    max_asymmetry: float
    max_idempotence_defect: float
    rank: int
    passed: bool

    def __str__(self):
        status = "pass" if self.passed else "FAIL"
        return (
            f"{status}: asymmetry {self.max_asymmetry:.3e}, "
            f"idempotence defect {self.max_idempotence_defect:.3e}, rank {self.rank}"
        )


def projection_from_h(h, design: StudyDesign) -> BlockMatrix:
    """The orthogonal projection onto the row space of `h`.

    Computes ``T = H^T (H H^T)^+ H``, which is symmetric and idempotent
    for any real `h` with D columns, and is invariant under invertible
    row operations on `h`.
    """
    hm = as_matrix(h)
    if hm.shape[1] != design.total_dim:
        raise ValueError(
            f"hypothesis rows have {hm.shape[1]} columns, design needs D = {design.total_dim}"
        )
    t = hm.T @ pseudo_inverse(hm @ hm.T) @ hm
    t = (t + t.T) / 2.0
    return BlockMatrix(design, t)


def scenario_a_matrix(design: StudyDesign) -> BlockMatrix:
    """Flat-profile hypothesis within each of two groups.

    Block-diagonal ``diag(P_{d_1}, P_{d_2})`` with ``P_d = I_d - J_d/d``
    the centering projection: the null states that each group's mean
    vector is constant across its own coordinates. Rank is D - 2, so the
    spectrum of the scaled products spreads over many comparable
    eigenvalues. Requires two groups with d_i >= 2 (centering a scalar is
    identically zero).
    """
    if design.a != 2:
        raise ValueError("the canned scenarios are defined for exactly two groups")
    if any(d < 2 for d in design.dims):
        raise ValueError("flat-profile hypothesis needs every d_i >= 2")
    blocks = []
    for d in design.dims:
        blocks.append(np.eye(d) - np.ones((d, d)) / d)
    t = np.zeros((design.total_dim, design.total_dim))
    off = design.dim_offsets()
    for i, b in enumerate(blocks):
        t[off[i]:off[i + 1], off[i]:off[i + 1]] = b
    return BlockMatrix(design, t)


def scenario_b_matrix(design: StudyDesign) -> BlockMatrix:
    """Equality of the two groups' averaged components.

    Rank-one projection ``T = v v^T / ||v||^2`` with
    ``v = (1_{d_1}/d_1, -1_{d_2}/d_2)``: the null states that the mean of
    group 1's coordinates equals the mean of group 2's. One nonzero
    eigenvalue, so the standardized statistic stays in the single-weight
    regime at every dimension.
    """
    if design.a != 2:
        raise ValueError("the canned scenarios are defined for exactly two groups")
    d1, d2 = design.dims
    v = np.concatenate([np.full(d1, 1.0 / d1), np.full(d2, -1.0 / d2)])
    t = np.outer(v, v) / float(v @ v)
    return BlockMatrix(design, t)


@dataclass(frozen=True, eq=False)
class ScenarioSpec:
    """A canned two-group simulation setting: label, design, covariances.

    Label "A" pairs the flat-profile hypothesis with equicorrelated
    compound-symmetry covariances (many near-equal eigenvalues); label
    "B" pairs the averaged-components hypothesis with two autoregressive
    covariances, the second with a dimension-scaled horizon (a single
    dominant eigenvalue).
    """

    label: str
    design: StudyDesign
    covariances: tuple[CovarianceModel, ...]

    def matrix(self) -> BlockMatrix:
        if self.label == "A":
            return scenario_a_matrix(self.design)
        return scenario_b_matrix(self.design)


def canned_scenario(label: str, design: StudyDesign, rho: float = 0.6) -> ScenarioSpec:
    """The covariance pairing for canned labels "A" and "B"."""
    if label == "A":
        covs = tuple(compound_symmetry(d) for d in design.dims)
    elif label == "B":
        if design.a != 2:
            raise ValueError("the canned scenarios are defined for exactly two groups")
        covs = (ar(design.dims[0], rho), scaled_ar(design.dims[1], rho))
    else:
        raise ValueError(f"unknown scenario label {label!r}")
    return ScenarioSpec(label, design, covs)


def validate_hypothesis(t) -> ValidationReport:
    """Report how far `t` is from a symmetric idempotent projection.

    Accepts a BlockMatrix or a plain square array (block structure plays
    no role in validation). Rank counts eigenvalues >= 0.5 of the
    symmetrized matrix. The report passes iff asymmetry <= 1e-10 and the
    idempotence defect ``max|T^2 - T|`` <= 1e-8.
    """
    m = t.data if isinstance(t, BlockMatrix) else as_matrix(t, square=True)
    asym = max_abs(m - m.T)
    defect = max_abs(m @ m - m)
    sym = (m + m.T) / 2.0
    vals, _ = sym_eigen(sym, tol=np.inf)
    rank = int(np.sum(vals >= 0.5))
    passed = bool(asym <= SYMMETRY_TOL and defect <= IDEMPOTENCE_TOL)
    return ValidationReport(asym, defect, rank, passed)
