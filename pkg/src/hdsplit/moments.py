"""Exact (known-covariance) moments and spectrum of the quadratic form.

With ``V_N`` the block-diagonal of the ``(N/n_i)``-scaled group
covariances, the statistic ``Q_N = N xbar^T T xbar`` has null mean
``tr(T V_N)`` and null variance ``2 tr((T V_N)^2)``.  The eigenvalues of
``T V_N T`` drive everything downstream: the standardized statistic is
distributed as the correspondingly weighted sum of centred chi-square-1
variables, and the first three trace powers give the moment-matching
degrees of freedom ``t2^3 / t3^2``.

This layer requires the covariances to be known; it is the ground truth
that the data-driven trace estimators are tested against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateVarianceError
from .hypothesis import BlockMatrix
from .linalg import sym_eigen
from .model import GroupedSample, StudyDesign, materialize_covariance, pooled_mean

# eigenvalues of the symmetrized product below -NEGATIVE_EIG_TOL * max
# are reported; anything closer to zero is clamped (the product is PSD
# in exact arithmetic)
NEGATIVE_EIG_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class SpectralSummary:
    """Eigenvalues and trace powers of ``T V_N T``.

    Attributes
    ----------
    eigenvalues : descending, clamped to be nonnegative.
    weights : eigenvalues scaled to unit square-norm (all zero when the
        spectrum is degenerate).
    t1, t2, t3 : tr(T V_N), tr((T V_N)^2), tr((T V_N)^3), computed by
        matrix products (not from the eigenvalues).
    f_pearson : t2**3 / t3**2, or None when degenerate.
    degenerate : True when the spectrum is identically zero.
    """

    eigenvalues: np.ndarray
    weights: np.ndarray
    t1: float
    t2: float
    t3: float
    f_pearson: float | None
    degenerate: bool


def build_vn(design: StudyDesign, covs) -> BlockMatrix:
    """Block-diagonal ``V_N`` with block i equal to ``(N/n_i) Sigma_i``."""
    if len(covs) != design.a:
        raise ValueError("one covariance model per group is required")
    total = design.total_size
    off = design.dim_offsets()
    v = np.zeros((design.total_dim, design.total_dim))
    for i, (cov, n, d) in enumerate(zip(covs, design.sizes, design.dims)):
        sigma = materialize_covariance(cov)
        if sigma.shape != (d, d):
            raise ValueError(
                f"covariance {i + 1} materializes to {sigma.shape}, design expects {(d, d)}"
            )
        v[off[i]:off[i + 1], off[i]:off[i + 1]] = (total / n) * sigma
    return BlockMatrix(design, v)


def q_statistic(sample: GroupedSample, t: BlockMatrix) -> float:
    """``Q_N = N xbar^T T xbar`` for the pooled mean vector xbar."""
    if t.design.dims != sample.design.dims:
        raise ValueError("hypothesis and sample block structures differ")
    xbar = pooled_mean(sample)
    return float(sample.design.total_size * (xbar @ t.data @ xbar))


def exact_moments(t: BlockMatrix, vn: BlockMatrix) -> tuple[float, float]:
    """Null mean and variance of Q_N from the known covariances.

    Both are computed twice: blockwise (sums of per-group-pair traces,
    which never materialize a D x D product) and as whole-matrix traces.
    The routes must agree to 1e-6 relative; disagreement indicates a
    broken block layout and raises.
    """
    design = t.design
    if vn.design.dims != design.dims:
        raise ValueError("hypothesis and V_N block structures differ")
    a = design.a

    mean_blocks = 0.0
    var_blocks = 0.0
    for i in range(1, a + 1):
        mean_blocks += np.trace(t.block(i, i) @ vn.block(i, i))
        for r in range(1, a + 1):
            # T_ir (V_N)_rr T_ri (V_N)_ii carries the N^2/(n_i n_r) scaling
            # inside the V_N blocks
            var_blocks += np.trace(t.block(i, r) @ vn.block(r, r) @ t.block(r, i) @ vn.block(i, i))
    var_blocks *= 2.0

    tv = t.data @ vn.data
    mean_full = float(np.trace(tv))
    var_full = float(2.0 * np.sum(tv * tv.T))

    scale_m = max(1.0, abs(mean_full))
    scale_v = max(1.0, abs(var_full))
    if abs(mean_blocks - mean_full) > 1e-6 * scale_m or abs(var_blocks - var_full) > 1e-6 * scale_v:
        raise ArithmeticError(
            "blockwise and whole-matrix moment routes disagree: "
            f"mean {mean_blocks!r} vs {mean_full!r}, variance {var_blocks!r} vs {var_full!r}"
        )
    return mean_full, var_full


def spectral_summary(t: BlockMatrix, vn: BlockMatrix) -> SpectralSummary:
    """Spectrum of ``T V_N T`` plus the first three trace powers."""
    design = t.design
    if vn.design.dims != design.dims:
        raise ValueError("hypothesis and V_N block structures differ")
    product = t.data @ vn.data @ t.data
    vals, _ = sym_eigen((product + product.T) / 2.0)

    top = float(vals[0]) if vals.size else 0.0
    floor = -NEGATIVE_EIG_TOL * max(top, 0.0)
    if np.any(vals < floor):
        import warnings

        warnings.warn(
            f"spectrum has negative eigenvalue {vals.min():.3e} beyond round-off; "
            "the hypothesis matrix may not be a projection",
            RuntimeWarning,
            stacklevel=2,
        )
    vals = np.clip(vals, 0.0, None)

    tv = t.data @ vn.data
    t1 = float(np.trace(tv))
    t2 = float(np.sum(tv * tv.T))
    t3 = float(np.trace(tv @ tv @ tv))

    sq = float(vals @ vals)
    degenerate = sq == 0.0
    weights = np.zeros_like(vals) if degenerate else vals / np.sqrt(sq)
    f_pearson = None if t3 == 0.0 else t2 ** 3 / t3 ** 2
    return SpectralSummary(vals, weights, t1, t2, t3, f_pearson, degenerate)


def standardized_statistic(q: float, mean: float, variance: float) -> float:
    """``(q - mean)/sqrt(variance)``; requires a positive variance."""
    if not variance > 0.0:
        raise DegenerateVarianceError(
            f"null variance must be positive to standardize, got {variance!r}"
        )
    return (q - mean) / float(np.sqrt(variance))
