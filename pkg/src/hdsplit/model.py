"""Study designs, covariance models, and Gaussian data generation.

The data model: ``a`` independent groups, group ``i`` contributing
``n_i`` independent observations in ``R^{d_i}`` drawn from a normal
distribution with group-specific mean and covariance. Dimensions may
differ between groups; the stacked dimension is ``D = sum(d_i)`` and the
total sample size is ``N = sum(n_i)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import as_matrix, cholesky


@dataclass(frozen=True)
class StudyDesign:
    """Per-group dimensions and sample sizes.

    Attributes
    ----------
    dims : tuple of int
        d_1..d_a, each >= 1.
    sizes : tuple of int
        n_1..n_a, each >= 2 (within-group differences of two observations
        are required downstream).
    """

    dims: tuple[int, ...]
    sizes: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        sizes = tuple(int(n) for n in self.sizes)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "sizes", sizes)
        if len(dims) != len(sizes) or len(dims) == 0:
            raise ValueError("dims and sizes must be equal-length and non-empty")
        if any(d < 1 for d in dims):
            raise ValueError("every group dimension must be >= 1")
        if any(n < 2 for n in sizes):
            raise ValueError("every group size must be >= 2")

    @property
    def a(self) -> int:
        return len(self.dims)

    @property
    def total_dim(self) -> int:
        """D, the stacked dimension."""
        return sum(self.dims)

    @property
    def total_size(self) -> int:
        """N, the total number of observations."""
        return sum(self.sizes)

    @property
    def n_min(self) -> int:
        return min(self.sizes)

    def dim_offsets(self) -> np.ndarray:
        """Start offset of each group's block in a stacked D-vector."""
        return np.concatenate(([0], np.cumsum(self.dims)))


@dataclass(frozen=True, eq=False)
class CovarianceModel:
    """A symmetric positive definite covariance matrix, by recipe.

    Kinds
    -----
    compound_symmetry
        ``base * I_d + jfactor * J_d`` where ``J_d`` is all-ones;
        ``jfactor=None`` means ``1/d``, the equicorrelation used by the
        canned simulation scenarios.
    ar
        ``rho ** |s - t|``.
    scaled_ar
        ``rho ** (|s - t| / (d - 1))``; the correlation horizon widens
        with the dimension, so the matrix stays far from the identity as
        ``d`` grows. Needs ``d >= 2``.
    explicit
        A caller-supplied SPD matrix.
    """

    kind: str
    dimension: int
    rho: float | None = None
    base: float = 1.0
    jfactor: float | None = None
    matrix: np.ndarray | None = field(default=None, repr=False)

    _KINDS = ("compound_symmetry", "ar", "scaled_ar", "explicit")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown covariance kind {self.kind!r}")
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if self.kind in ("ar", "scaled_ar"):
            if self.rho is None or not -1.0 < self.rho < 1.0:
                raise ValueError("autoregressive kinds need rho in (-1, 1)")
        if self.kind == "scaled_ar" and self.dimension < 2:
            raise ValueError("scaled_ar needs dimension >= 2")
        if self.kind == "explicit" and self.matrix is None:
            raise ValueError("explicit kind needs a matrix")


def compound_symmetry(dimension: int, base: float = 1.0, jfactor: float | None = None) -> CovarianceModel:
    return CovarianceModel("compound_symmetry", dimension, base=base, jfactor=jfactor)


def ar(dimension: int, rho: float) -> CovarianceModel:
    return CovarianceModel("ar", dimension, rho=rho)


def scaled_ar(dimension: int, rho: float) -> CovarianceModel:
    return CovarianceModel("scaled_ar", dimension, rho=rho)


def explicit(matrix) -> CovarianceModel:
    m = as_matrix(matrix, square=True)
    return CovarianceModel("explicit", m.shape[0], matrix=m)


def materialize_covariance(model: CovarianceModel) -> np.ndarray:
    """Build the d x d covariance matrix for `model`.

    The result is symmetric positive definite for every admissible kind;
    compound symmetry additionally requires ``base > 0`` and
    ``base + d * jfactor > 0``.
    """
    d = model.dimension
    if model.kind == "compound_symmetry":
        jf = model.jfactor if model.jfactor is not None else 1.0 / d
        if model.base <= 0 or model.base + d * jf <= 0:
            raise ValueError("compound symmetry parameters are not positive definite")
        return model.base * np.eye(d) + jf * np.ones((d, d))
    if model.kind == "ar":
        lags = np.abs(np.subtract.outer(np.arange(d), np.arange(d)))
        return np.asarray(model.rho, dtype=float) ** lags
    if model.kind == "scaled_ar":
        lags = np.abs(np.subtract.outer(np.arange(d), np.arange(d)))
        return np.asarray(model.rho, dtype=float) ** (lags / (d - 1))
    return model.matrix.copy()


@dataclass(frozen=True, eq=False)
class GroupedSample:
    """Observed data: one ``n_i x d_i`` matrix per group."""

    design: StudyDesign
    groups: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.groups) != self.design.a:
            raise ValueError("group count does not match the design")
        checked = []
        for i, (g, n, d) in enumerate(zip(self.groups, self.design.sizes, self.design.dims)):
            g = np.asarray(g, dtype=float)
            if g.shape != (n, d):
                raise ValueError(
                    f"group {i + 1} has shape {g.shape}, design expects {(n, d)}"
                )
            if not np.all(np.isfinite(g)):
                raise ValueError(f"group {i + 1} contains non-finite values")
            checked.append(g)
        object.__setattr__(self, "groups", tuple(checked))

    def group_means(self) -> tuple[np.ndarray, ...]:
        return tuple(g.mean(axis=0) for g in self.groups)


def pooled_mean(sample: GroupedSample) -> np.ndarray:
    """Concatenation of the per-group arithmetic means, a D-vector."""
    return np.concatenate([g.mean(axis=0) for g in sample.groups])


def _check_model_inputs(design, means, covs):
    if len(covs) != design.a:
        raise ValueError("one covariance model per group is required")
    for i, (cov, d) in enumerate(zip(covs, design.dims)):
        if cov.dimension != d:
            raise ValueError(
                f"covariance {i + 1} has dimension {cov.dimension}, design expects {d}"
            )
    if means is None:
        means = [np.zeros(d) for d in design.dims]
    if len(means) != design.a:
        raise ValueError("one mean vector per group is required")
    out = []
    for i, (mu, d) in enumerate(zip(means, design.dims)):
        mu = np.zeros(d) if mu is None else np.asarray(mu, dtype=float)
        if mu.shape != (d,):
            raise ValueError(f"mean {i + 1} has shape {mu.shape}, design expects ({d},)")
        out.append(mu)
    return out


def _per_group_rngs(design, rng):
    if isinstance(rng, np.random.Generator):
        return [rng] * design.a
    rngs = list(rng)
    if len(rngs) != design.a:
        raise ValueError("need one random stream per group")
    return rngs


def sample(design: StudyDesign, means, covs, rng) -> GroupedSample:
    """Draw one data set: row j of group i is ``mu_i + L_i xi`` with
    ``xi`` standard normal and ``L_i`` the Cholesky factor of ``Sigma_i``.

    `rng` is a numpy Generator, or a sequence of per-group Generators for
    callers that manage parallel streams.
    """
    means = _check_model_inputs(design, means, covs)
    rngs = _per_group_rngs(design, rng)
    groups = []
    for mu, cov, n, g_rng in zip(means, covs, design.sizes, rngs):
        root = cholesky(materialize_covariance(cov))
        xi = g_rng.standard_normal((n, cov.dimension))
        groups.append(mu + xi @ root.T)
    return GroupedSample(design, tuple(groups))


def sample_batch(design: StudyDesign, means, covs, rng, reps: int) -> list[np.ndarray]:
    """Draw `reps` independent data sets at once.

    Returns one ``(reps, n_i, d_i)`` array per group, all generated from
    `rng` (or per-group streams) in group order. Memory is the caller's
    concern; chunk over `reps` for large designs.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    means = _check_model_inputs(design, means, covs)
    rngs = _per_group_rngs(design, rng)
    out = []
    for mu, cov, n, g_rng in zip(means, covs, design.sizes, rngs):
        root = cholesky(materialize_covariance(cov))
        xi = g_rng.standard_normal((reps, n, cov.dimension))
        out.append(mu + xi @ root.T)
    return out


def replication_streams(master_seed: int, replication: int, n_groups: int) -> list[np.random.Generator]:
    """Independent counter-based streams keyed by (seed, group, replication).

    The keying is positional, not sequential, so any subset of
    replications can be generated in any order (or on any worker) and
    still produce identical data.
    """
    return [
        np.random.Generator(
            np.random.Philox(np.random.SeedSequence(master_seed, spawn_key=(group, replication)))
        )
        for group in range(n_groups)
    ]
