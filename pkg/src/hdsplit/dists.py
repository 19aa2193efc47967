"""Reference distributions for the decision rules.

Quantiles of the standard normal and of chi-square with real (possibly
non-integer) degrees of freedom, the centred-and-scaled chi-square
transform ``K_f = (chi2_f - f)/sqrt(2 f)``, and a sampler for weighted
sums of standardized chi-square-1 variables (the finite-sample law of
the standardized quadratic form).

Quantile inversion is delegated to the regularized incomplete gamma
routines in ``scipy.special``; one code path covers degrees of freedom
from below 1 up to the millions.
"""

from __future__ import annotations

import numpy as np
from scipy import special


def _check_level(level: float) -> float:
    level = float(level)
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must be in (0, 1), got {level}")
    return level


def normal_quantile(level: float) -> float:
    """Inverse standard normal CDF."""
    return float(special.ndtri(_check_level(level)))


def normal_cdf(x) -> np.ndarray:
    return special.ndtr(np.asarray(x, dtype=float))


def chisq_quantile(level: float, df: float) -> float:
    """Inverse chi-square CDF with real df > 0.

    The CDF is the regularized lower incomplete gamma function evaluated
    at ``(df/2, x/2)``; the quantile inverts it in its second argument.
    """
    level = _check_level(level)
    df = float(df)
    if df <= 0:
        raise ValueError(f"degrees of freedom must be positive, got {df}")
    return float(2.0 * special.gammaincinv(df / 2.0, level))


def chisq_cdf(x, df: float) -> np.ndarray:
    if df <= 0:
        raise ValueError(f"degrees of freedom must be positive, got {df}")
    return special.gammainc(df / 2.0, np.asarray(x, dtype=float) / 2.0)


def kf_quantile(level: float, df: float) -> float:
    """Quantile of ``(chi2_df - df)/sqrt(2 df)``.

    Interpolates between the two limiting references: at df = 1 it is the
    standardized chi-square-1 threshold, and as df grows it approaches
    the standard normal quantile.
    """
    df = float(df)
    return (chisq_quantile(level, df) - df) / np.sqrt(2.0 * df)


def weighted_chisq_sample(weights, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draws of ``sum_s w_s (C_s - 1)/sqrt(2) + sqrt(1 - sum w_s^2) Z``.

    ``C_s`` are i.i.d. chi-square-1 and ``Z`` standard normal, so every
    draw has mean 0 and variance 1 whenever ``sum w_s^2 <= 1``. With the
    full weight vector of a spectral summary the mixture reproduces the
    exact null law of the standardized quadratic form; truncated weight
    vectors get the deficit back through the normal component.
    """
    w = np.asarray(weights, dtype=float).ravel()
    if count < 1:
        raise ValueError("count must be >= 1")
    norm2 = float(w @ w) if w.size else 0.0
    if norm2 > 1.0 + 1e-8:
        raise ValueError(f"squared weight norm {norm2:.6f} exceeds 1")
    resid = np.sqrt(max(0.0, 1.0 - norm2))
    out = np.zeros(count)
    # chunked so count x len(w) never materializes all at once
    step = max(1, int(2e7 // max(1, w.size)))
    for start in range(0, count, step):
        stop = min(count, start + step)
        block = stop - start
        if w.size:
            c = rng.chisquare(1.0, size=(block, w.size))
            out[start:stop] = (c - 1.0) @ w / np.sqrt(2.0)
        if resid > 0.0:
            out[start:stop] += resid * rng.standard_normal(block)
    return out
