"""Dense symmetric-matrix kernels used throughout the package.

Everything here is a thin, contract-checked layer over LAPACK (via numpy
and scipy): symmetric eigendecomposition, Cholesky factorization, and the
Moore-Penrose pseudoinverse. Inputs are plain 2-D ``numpy`` arrays of
finite floats; outputs are freshly allocated arrays.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg.lapack import dpotrf

from .errors import FactorizationError

DEFAULT_SYMMETRY_TOL = 1e-10
DEFAULT_RANK_TOL = 1e-10


def as_matrix(m, square: bool = False) -> np.ndarray:
    """Validate and return `m` as a 2-D float array.

    Raises
    ------
    ValueError
        If `m` is not 2-D, has a zero dimension, contains non-finite
        entries, or (with ``square=True``) is not square.
    """
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] == 0 or a.shape[1] == 0:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix contains non-finite entries")
    if square and a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    return a


def max_abs(m: np.ndarray) -> float:
    """Entrywise max-absolute-value norm."""
    return float(np.max(np.abs(m))) if m.size else 0.0


def sym_eigen(m, tol: float = DEFAULT_SYMMETRY_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix, eigenvalues descending.

    Parameters
    ----------
    m : array_like
        Square matrix with ``max|m - m^T| <= tol``.
    tol : float
        Largest tolerated asymmetry.

    Returns
    -------
    (eigenvalues, eigenvectors)
        ``eigenvalues`` sorted descending; ``eigenvectors[:, k]`` is the
        unit eigenvector for ``eigenvalues[k]``. The decomposition is
        computed on the symmetrized matrix ``(m + m^T)/2``.
    """
    a = as_matrix(m, square=True)
    asym = max_abs(a - a.T)
    if asym > tol:
        raise ValueError(f"matrix asymmetry {asym:.3e} exceeds tolerance {tol:.3e}")
    sym = (a + a.T) / 2.0
    vals, vecs = np.linalg.eigh(sym)
    order = np.argsort(vals)[::-1]
    return vals[order], vecs[:, order]


def cholesky(m) -> np.ndarray:
    """Lower-triangular L with ``L @ L.T == m`` for SPD `m`.

    Raises
    ------
    FactorizationError
        If a pivot is non-positive; the 1-based index of the failing
        pivot is reported and stored on the exception.
    """
    a = as_matrix(m, square=True)
    asym = max_abs(a - a.T)
    if asym > DEFAULT_SYMMETRY_TOL * max(1.0, max_abs(a)):
        raise ValueError(f"matrix asymmetry {asym:.3e}: Cholesky needs a symmetric input")
    c, info = dpotrf(a, lower=1, clean=1, overwrite_a=0)
    if info > 0:
        raise FactorizationError(
            f"matrix is not positive definite: pivot {info} failed", pivot=int(info)
        )
    if info < 0:
        raise ValueError(f"illegal Cholesky argument at position {-info}")
    return c


def pseudo_inverse(m, rank_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Moore-Penrose pseudoinverse via SVD.

    Singular values below ``rank_tol * sigma_max`` are treated as exact
    zeros, so exactly rank-deficient inputs (e.g. products of projection
    factors) invert cleanly on their range.
    """
    a = as_matrix(m)
    if rank_tol <= 0:
        raise ValueError("rank_tol must be positive")
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((a.shape[1], a.shape[0]))
    keep = s > rank_tol * s[0]
    inv = np.zeros_like(s)
    inv[keep] = 1.0 / s[keep]
    return (vt.T * inv) @ u.T
