"""Data-driven estimators of tr(TV_N), tr((TV_N)^2), tr((TV_N)^3).

All estimators are built from the centred difference vectors

    Z_(l1, l2) = concat_i sqrt(N/n_i) (X_{i, l1_i} - X_{i, l2_i}),

which are mean-free under both the null and the alternative, and from
the quadratic kernels ``Z^T T Z'``. Four families are provided:

* full U-statistics over every admissible per-group index combination
  (``a1_full``, ``a2_full``, ``a3_full``),
* their index-subsampled versions (``a_star``),
* permutation-mixed estimators whose indices are shared across groups
  and rerandomized within groups (``b_estimators``), which lift the
  sample-size-versus-group-count restrictions of the full family,
* and their subsampled versions (``b_star``).

Every kernel evaluation reduces to a four-entry gather from one N x N
Gram matrix ``G[(i,j),(r,l)] = sqrt(N^2/(n_i n_r)) X_{i,j}^T T_{ir}
X_{r,l}``, built once per (sample, hypothesis) pair. The exact
third-order sum additionally exploits that jointly permuting the three
index pairs and jointly swapping indices within a pair leave the summand
unchanged: only one representative per 48-element orbit is evaluated.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np

from .errors import DegenerateVarianceError, EnumerationCapError
from .hypothesis import BlockMatrix
from .model import GroupedSample, StudyDesign

DEFAULT_ENUMERATION_CAP = 10_000_000

# chunk of kernel evaluations processed at once in enumeration paths
_CHUNK = 1 << 18


# ---------------------------------------------------------------------------
# domain containers


@dataclass(frozen=True)
class IndexTuple:
    """Per group, an ordered list of m distinct 0-based observation indices."""

    per_group: tuple[tuple[int, ...], ...]

    @staticmethod
    def checked(design: StudyDesign, per_group, m: int | None = None) -> "IndexTuple":
        rows = tuple(tuple(int(x) for x in grp) for grp in per_group)
        if len(rows) != design.a:
            raise ValueError("need one index list per group")
        for i, (grp, n) in enumerate(zip(rows, design.sizes)):
            if m is not None and len(grp) != m:
                raise ValueError(f"group {i + 1} holds {len(grp)} indices, expected {m}")
            if len(set(grp)) != len(grp):
                raise ValueError(f"group {i + 1} repeats an index")
            if any(not 0 <= x < n for x in grp):
                raise ValueError(f"group {i + 1} index out of range 0..{n - 1}")
        return IndexTuple(rows)


@dataclass(frozen=True, eq=False)
class PermutationSet:
    """For each repetition j and group i, a permutation of 0..n_i-1.

    Stored per group as a (count, n_i) array whose row j is the j-th
    permutation of that group.
    """

    design: StudyDesign
    per_group: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.per_group) != self.design.a:
            raise ValueError("need one permutation table per group")
        counts = {p.shape[0] for p in self.per_group}
        if len(counts) != 1:
            raise ValueError("permutation tables disagree on the repetition count")
        for i, (p, n) in enumerate(zip(self.per_group, self.design.sizes)):
            if p.ndim != 2 or p.shape[1] != n or not np.array_equal(
                np.sort(p, axis=1), np.tile(np.arange(n), (p.shape[0], 1))
            ):
                raise ValueError(f"group {i + 1}: rows are not permutations of 0..{n - 1}")

    @property
    def count(self) -> int:
        return self.per_group[0].shape[0]

    def table(self, count: int, m: int) -> list[np.ndarray]:
        """First `m` images of the first `count` permutations, per group,
        each as a (count, m) array of 0-based within-group indices."""
        if count > self.count:
            raise ValueError(f"{count} repetitions requested, only {self.count} available")
        return [p[:count, :m] for p in self.per_group]


def draw_permutations(design: StudyDesign, count: int, rng: np.random.Generator) -> PermutationSet:
    """`count` independent uniform permutations per group."""
    if count < 1:
        raise ValueError("count must be >= 1")
    tables = tuple(
        np.argsort(rng.random((count, n)), axis=1) for n in design.sizes
    )
    return PermutationSet(design, tables)


def identity_permutations(design: StudyDesign, count: int) -> PermutationSet:
    tables = tuple(np.tile(np.arange(n), (count, 1)) for n in design.sizes)
    return PermutationSet(design, tables)


@dataclass(frozen=True)
class IndexSource:
    """Where subsampled estimators get their index tuples.

    kind "random" draws uniformly without within-group reuse from `rng`;
    kind "enumerate" walks every admissible combination exactly once, in
    which case the subsampled estimators reproduce their full
    counterparts.
    """

    kind: str = "random"
    rng: np.random.Generator | None = None

    def __post_init__(self):
        if self.kind not in ("random", "enumerate"):
            raise ValueError(f"unknown index source kind {self.kind!r}")
        if self.kind == "random" and self.rng is None:
            raise ValueError("a random index source needs an rng")


@dataclass(frozen=True)
class TraceEstimates:
    """Estimates of the first three trace powers, with provenance."""

    t1: float
    t2: float | None
    t3: float | None
    family: str  # A | Astar | B | Bstar | exact
    upsilon: dict | None = None


def fhat_pearson(est: TraceEstimates) -> float:
    """Moment-matching degrees of freedom ``t2^3 / t3^2``.

    Analytically the ratio is >= 1; estimates that undershoot are floored
    at 1.0 with a warning. A vanishing third-order trace leaves the ratio
    undefined and raises.
    """
    if est.t2 is None or est.t3 is None:
        raise ValueError("fhat_pearson needs both t2 and t3 estimates")
    if est.t3 == 0.0:
        raise DegenerateVarianceError("third-order trace estimate is zero")
    raw = est.t2 ** 3 / est.t3 ** 2
    if raw >= 1.0:
        return raw
    # an exactly-1 ratio can land a few ulps below 1; only genuine
    # undershoots deserve a warning
    if raw > 1.0 - 1e-9:
        return 1.0
    warnings.warn(
        f"degrees-of-freedom estimate {raw:.4g} below 1; flooring at 1.0",
        RuntimeWarning,
        stacklevel=2,
    )
    return 1.0


# ---------------------------------------------------------------------------
# the row Gram matrix


@dataclass(frozen=True, eq=False)
class _Gram:
    design: StudyDesign
    g: np.ndarray  # (N, N)
    row_off: np.ndarray  # (a + 1,)


def _row_gram(sample: GroupedSample, t: BlockMatrix) -> _Gram:
    design = sample.design
    if t.design.dims != design.dims:
        raise ValueError("hypothesis and sample block structures differ")
    total = design.total_size
    scales = [np.sqrt(total / n) for n in design.sizes]
    row_off = np.concatenate(([0], np.cumsum(design.sizes)))
    g = np.empty((total, total))
    for i in range(design.a):
        for r in range(design.a):
            block = (scales[i] * scales[r]) * (
                sample.groups[i] @ t.block(i + 1, r + 1) @ sample.groups[r].T
            )
            g[row_off[i]:row_off[i + 1], row_off[r]:row_off[r + 1]] = block
    g = (g + g.T) / 2.0
    return _Gram(design, g, row_off)


def z_vector(sample: GroupedSample, first, second) -> np.ndarray:
    """The stacked scaled difference vector for one index per group.

    `first` and `second` hold one 0-based observation index per group and
    must differ within every group.
    """
    design = sample.design
    first = [int(x) for x in first]
    second = [int(x) for x in second]
    if len(first) != design.a or len(second) != design.a:
        raise ValueError("need one index per group on each side")
    parts = []
    for i, (f, s, n) in enumerate(zip(first, second, design.sizes)):
        if f == s:
            raise ValueError(f"group {i + 1}: the two indices must differ")
        if not (0 <= f < n and 0 <= s < n):
            raise ValueError(f"group {i + 1}: index out of range 0..{n - 1}")
        scale = np.sqrt(design.total_size / n)
        parts.append(scale * (sample.groups[i][f] - sample.groups[i][s]))
    return np.concatenate(parts)


# ---------------------------------------------------------------------------
# cached index structures (functions of the group size only)


@lru_cache(maxsize=64)
def _sorted_pairs(n: int) -> np.ndarray:
    """All (lo, hi) with lo < hi, lexicographic; shape (C(n,2), 2)."""
    return np.array(list(combinations(range(n), 2)), dtype=np.intp)


@lru_cache(maxsize=64)
def _pair_disjoint(n: int) -> np.ndarray:
    pairs = _sorted_pairs(n)
    hit = (pairs[:, None, :, None] == pairs[None, :, None, :]).any(axis=(2, 3))
    return ~hit


@lru_cache(maxsize=64)
def _pair_quadruples(n: int) -> np.ndarray:
    """Ordered pairs (p, q) of disjoint sorted-pair ids; 6*C(n,4) rows."""
    mask = _pair_disjoint(n)
    p, q = np.nonzero(mask)
    return np.column_stack([p, q]).astype(np.intp)


@lru_cache(maxsize=16)
def _ordered_pairs(n: int) -> np.ndarray:
    """All (u, v) with u != v; shape (n(n-1), 2)."""
    u, v = np.nonzero(~np.eye(n, dtype=bool))
    return np.column_stack([u, v]).astype(np.intp)


@lru_cache(maxsize=16)
def _ordered_pair_disjoint(n: int) -> np.ndarray:
    pairs = _ordered_pairs(n)
    hit = (pairs[:, None, :, None] == pairs[None, :, None, :]).any(axis=(2, 3))
    return ~hit


@lru_cache(maxsize=16)
def _ordered_sixtuples(n: int) -> np.ndarray:
    """Ordered triples of pairwise-disjoint ordered-pair ids.

    One row per ordered 6-tuple of distinct indices (n!/(n-6)! rows),
    encoded as three ordered-pair ids.
    """
    mask = _ordered_pair_disjoint(n)
    rows = []
    ids = np.arange(len(mask))
    for o1 in ids:
        for o2 in ids[mask[o1]]:
            for o3 in ids[mask[o1] & mask[o2]]:
                rows.append((o1, o2, o3))
    return np.array(rows, dtype=np.intp)


@lru_cache(maxsize=16)
def _canonical_pair_triples(n: int) -> np.ndarray:
    """Pairwise-disjoint sorted-pair id triples p < q < r.

    For disjoint sorted pairs the id order coincides with the order of
    the pair minima, so these are exactly the orbit representatives of
    the 48-element symmetry of the third-order summand;
    n!/(n-6)!/48 rows.
    """
    mask = _pair_disjoint(n)
    rows = []
    count = len(mask)
    for p in range(count):
        for q in range(p + 1, count):
            if not mask[p, q]:
                continue
            rs = np.nonzero(mask[p] & mask[q])[0]
            for r in rs[rs > q]:
                rows.append((p, q, r))
    return np.array(rows, dtype=np.intp)


# ---------------------------------------------------------------------------
# gather helpers


def _quad_gather(g: np.ndarray, la, lb, ra, rb) -> np.ndarray:
    """Kernel values ``Z_(l1,l2)^T T Z_(l3,l4)`` for batched global rows.

    Each argument is a (batch, a) array of global row ids: la/lb are the
    per-group rows of the left pair, ra/rb of the right pair.
    """
    groups = la.shape[1]
    acc = np.zeros(la.shape[0])
    for i in range(groups):
        for r in range(groups):
            acc += g[la[:, i], ra[:, r]]
            acc -= g[la[:, i], rb[:, r]]
            acc -= g[lb[:, i], ra[:, r]]
            acc += g[lb[:, i], rb[:, r]]
    return acc


def _pair_gram(g: np.ndarray, rows_left: np.ndarray, rows_right: np.ndarray,
               pairs_left: np.ndarray, pairs_right: np.ndarray) -> np.ndarray:
    """Kernel matrix between two lists of index pairs.

    ``rows_*`` map local observation indices to global Gram rows;
    ``pairs_*`` are (count, 2) local index pairs. Entry [p, q] is the
    kernel of (left pair p, right pair q).
    """
    al = rows_left[pairs_left[:, 0]]
    bl = rows_left[pairs_left[:, 1]]
    ar = rows_right[pairs_right[:, 0]]
    br = rows_right[pairs_right[:, 1]]
    return (
        g[np.ix_(al, ar)] - g[np.ix_(al, br)] - g[np.ix_(bl, ar)] + g[np.ix_(bl, br)]
    )


def _mixed_radix(ids: np.ndarray, sizes: list[int]) -> list[np.ndarray]:
    """Decode linear ids into per-group digits (last group fastest)."""
    digits = []
    rest = ids
    for size in reversed(sizes):
        digits.append(rest % size)
        rest = rest // size
    digits.reverse()
    return digits


def _check_sizes(design: StudyDesign, minimum: int, what: str):
    bad = [i + 1 for i, n in enumerate(design.sizes) if n < minimum]
    if bad:
        raise ValueError(
            f"{what} needs at least {minimum} observations per group; "
            f"group(s) {bad} fall short"
        )


def _check_cap(count: int, cap: int, what: str):
    if count > cap:
        raise EnumerationCapError(
            f"{what} would evaluate {count} kernels, above the cap {cap}; "
            "use the subsampled estimators instead",
            count,
        )


# ---------------------------------------------------------------------------
# full U-statistics


def a1_full(sample: GroupedSample, t: BlockMatrix, cap: int = DEFAULT_ENUMERATION_CAP) -> float:
    """Exact first-order estimator: mean kernel over all per-group sorted
    index pairs, unbiased for tr(TV_N).

    The sum factorizes over groups, so it is evaluated in closed form;
    the cap still applies to the nominal combination count.
    """
    design = sample.design
    _check_sizes(design, 2, "the first-order estimator")
    count = math.prod(math.comb(n, 2) for n in design.sizes)
    _check_cap(count, cap, "the first-order estimator")
    gram = _row_gram(sample, t)
    g = gram.g
    off = gram.row_off
    total = 0.0
    for i, n_i in enumerate(design.sizes):
        block = g[off[i]:off[i + 1], off[i]:off[i + 1]]
        tr = float(np.trace(block))
        total += (n_i * tr - float(block.sum())) / math.comb(n_i, 2)
    weights = [n - 1.0 - 2.0 * np.arange(n) for n in design.sizes]
    for i in range(design.a):
        for r in range(design.a):
            if i == r:
                continue
            block = g[off[i]:off[i + 1], off[r]:off[r + 1]]
            total += float(weights[i] @ block @ weights[r]) / (
                math.comb(design.sizes[i], 2) * math.comb(design.sizes[r], 2)
            )
    return total / 2.0


def a2_full(sample: GroupedSample, t: BlockMatrix, cap: int = DEFAULT_ENUMERATION_CAP) -> float:
    """Exact second-order estimator, unbiased for tr((TV_N)^2).

    Sums the squared kernel over, per group, four distinct indices
    forming two sorted pairs; the normalizer is 4 * prod(6 C(n_i, 4)).
    """
    design = sample.design
    _check_sizes(design, 4, "the second-order estimator")
    count = math.prod(6 * math.comb(n, 4) for n in design.sizes)
    _check_cap(count, cap, "the second-order estimator")
    combos = [_pair_quadruples(n) for n in design.sizes]
    gram = _row_gram(sample, t)
    norm = 4.0 * math.prod(6 * math.comb(n, 4) for n in design.sizes)

    if design.a <= 2:
        total = _a2_sum_two_groups(gram, combos)
    else:
        total = _a2_sum_generic(gram, combos)
    return total / norm


def _group_rows(gram: _Gram, i: int) -> np.ndarray:
    return np.arange(gram.row_off[i], gram.row_off[i + 1])


def _a2_sum_two_groups(gram: _Gram, combos) -> float:
    design = gram.design
    pairs = [_sorted_pairs(n) for n in design.sizes]
    rows = [_group_rows(gram, i) for i in range(design.a)]
    u1 = _pair_gram(gram.g, rows[0], rows[0], pairs[0], pairs[0])
    c1 = combos[0]
    if design.a == 1:
        vals = u1[c1[:, 0], c1[:, 1]]
        return float(vals @ vals)
    u2 = _pair_gram(gram.g, rows[1], rows[1], pairs[1], pairs[1])
    c12 = _pair_gram(gram.g, rows[0], rows[1], pairs[0], pairs[1])
    c2 = combos[1]
    d1 = u1[c1[:, 0], c1[:, 1]]
    d2 = u2[c2[:, 0], c2[:, 1]]
    total = 0.0
    step = max(1, _CHUNK // max(1, len(c1)))
    for start in range(0, len(c2), step):
        sel = slice(start, min(len(c2), start + step))
        kern = (
            d1[:, None]
            + d2[None, sel]
            + c12[np.ix_(c1[:, 0], c2[sel, 1])]
            + c12[np.ix_(c1[:, 1], c2[sel, 0])]
        )
        total += float(np.sum(kern * kern))
    return total


def _a2_sum_generic(gram: _Gram, combos) -> float:
    design = gram.design
    pairs = [_sorted_pairs(n) for n in design.sizes]
    sizes = [len(c) for c in combos]
    count = math.prod(sizes)
    total = 0.0
    for start in range(0, count, _CHUNK):
        ids = np.arange(start, min(count, start + _CHUNK))
        digits = _mixed_radix(ids, sizes)
        la, lb, ra, rb = [], [], [], []
        for i, dig in enumerate(digits):
            quad = combos[i][dig]
            p = pairs[i][quad[:, 0]]
            q = pairs[i][quad[:, 1]]
            base = gram.row_off[i]
            la.append(base + p[:, 0])
            lb.append(base + p[:, 1])
            ra.append(base + q[:, 0])
            rb.append(base + q[:, 1])
        vals = _quad_gather(
            gram.g,
            np.column_stack(la), np.column_stack(lb),
            np.column_stack(ra), np.column_stack(rb),
        )
        total += float(vals @ vals)
    return total


def a3_full(sample: GroupedSample, t: BlockMatrix, cap: int = DEFAULT_ENUMERATION_CAP) -> float:
    """Exact third-order estimator, unbiased for tr((TV_N)^3).

    The defining sum runs over ordered 6-tuples of distinct indices in
    every group with the cyclic kernel product; it is invariant under
    jointly permuting the three pairs and jointly swapping within a pair
    (48 symmetries acting freely), so group 1 is restricted to orbit
    representatives and the result scaled back. The cap applies to the
    number of kernel products actually evaluated.
    """
    design = sample.design
    _check_sizes(design, 6, "the third-order estimator")
    count = (math.perm(design.sizes[0], 6) // 48) * math.prod(
        math.perm(n, 6) for n in design.sizes[1:]
    )
    _check_cap(count, cap, "the third-order estimator")
    canon = _canonical_pair_triples(design.sizes[0])
    others = [_ordered_sixtuples(n) for n in design.sizes[1:]]
    gram = _row_gram(sample, t)
    norm = 8.0 * math.prod(math.perm(n, 6) for n in design.sizes)

    if design.a == 1:
        total = _a3_sum_one_group(gram, canon)
    elif design.a == 2:
        total = _a3_sum_two_groups(gram, canon, others[0])
    else:
        total = _a3_sum_generic(gram, canon, others)
    return 48.0 * total / norm


def _a3_sum_one_group(gram: _Gram, canon: np.ndarray) -> float:
    pairs = _sorted_pairs(gram.design.sizes[0])
    rows = _group_rows(gram, 0)
    u = _pair_gram(gram.g, rows, rows, pairs, pairs)
    f0 = u[canon[:, 0], canon[:, 1]]
    f1 = u[canon[:, 1], canon[:, 2]]
    f2 = u[canon[:, 2], canon[:, 0]]
    return float(np.sum(f0 * f1 * f2))


def _a3_sum_two_groups(gram: _Gram, canon: np.ndarray, six2: np.ndarray) -> float:
    design = gram.design
    rows1 = _group_rows(gram, 0)
    rows2 = _group_rows(gram, 1)
    spairs = _sorted_pairs(design.sizes[0])
    opairs = _ordered_pairs(design.sizes[1])
    u1 = _pair_gram(gram.g, rows1, rows1, spairs, spairs)
    u2 = _pair_gram(gram.g, rows2, rows2, opairs, opairs)
    c12 = _pair_gram(gram.g, rows1, rows2, spairs, opairs)

    total = 0.0
    step = max(1, _CHUNK // max(1, len(canon)))
    for start in range(0, len(six2), step):
        sel = np.arange(start, min(len(six2), start + step))
        block = six2[sel]
        prod = None
        for s in range(3):
            sp = (s + 1) % 3
            factor = (
                u1[canon[:, s], canon[:, sp]][:, None]
                + c12[np.ix_(canon[:, s], block[:, sp])]
                + c12[np.ix_(canon[:, sp], block[:, s])]
                + u2[block[:, s], block[:, sp]][None, :]
            )
            prod = factor if prod is None else prod * factor
        total += float(prod.sum())
    return total


def _a3_sum_generic(gram: _Gram, canon: np.ndarray, others: list[np.ndarray]) -> float:
    design = gram.design
    triples = [canon] + others
    pair_lists = [_sorted_pairs(design.sizes[0])] + [
        _ordered_pairs(n) for n in design.sizes[1:]
    ]
    sizes = [len(tr) for tr in triples]
    count = math.prod(sizes)
    total = 0.0
    for start in range(0, count, _CHUNK):
        ids = np.arange(start, min(count, start + _CHUNK))
        digits = _mixed_radix(ids, sizes)
        slot_rows = []  # per slot: (first, second) global rows, (batch, a)
        for s in range(3):
            firsts, seconds = [], []
            for i, dig in enumerate(digits):
                pair_ids = triples[i][dig, s]
                pr = pair_lists[i][pair_ids]
                base = gram.row_off[i]
                firsts.append(base + pr[:, 0])
                seconds.append(base + pr[:, 1])
            slot_rows.append((np.column_stack(firsts), np.column_stack(seconds)))
        prod = None
        for s in range(3):
            sp = (s + 1) % 3
            factor = _quad_gather(
                gram.g, slot_rows[s][0], slot_rows[s][1], slot_rows[sp][0], slot_rows[sp][1]
            )
            prod = factor if prod is None else prod * factor
        total += float(prod.sum())
    return total


# ---------------------------------------------------------------------------
# subsampled full-family estimators


_ORDER_M = {1: 2, 2: 4, 3: 6}


def _draw_distinct(rng: np.random.Generator, n: int, m: int, count: int) -> np.ndarray:
    """(count, m) uniform ordered samples of m distinct values from 0..n-1."""
    return np.argsort(rng.random((count, n)), axis=1)[:, :m]


def a_star(sample: GroupedSample, t: BlockMatrix, which: int, upsilon: int,
           index_source: IndexSource, cap: int = DEFAULT_ENUMERATION_CAP) -> float:
    """Subsampled counterpart of the full estimators.

    `which` selects the trace order (1, 2, 3). With a random source,
    `upsilon` independent per-group index tuples are drawn and the kernel
    averaged; with an enumerating source every admissible combination is
    visited once and the full estimator is reproduced exactly.
    """
    if which not in _ORDER_M:
        raise ValueError("which must be 1, 2 or 3")
    design = sample.design
    m = _ORDER_M[which]
    _check_sizes(design, m, f"the order-{which} subsampled estimator")
    gram = _row_gram(sample, t)

    if index_source.kind == "enumerate":
        return _a_star_enumerate(gram, which, cap)

    if upsilon < 1:
        raise ValueError("upsilon must be >= 1")
    rng = index_source.rng
    draws = [
        gram.row_off[i] + _draw_distinct(rng, n, m, upsilon)
        for i, n in enumerate(design.sizes)
    ]
    cols = [np.column_stack([d[:, k] for d in draws]) for k in range(m)]
    if which == 1:
        vals = _quad_gather(gram.g, cols[0], cols[1], cols[0], cols[1])
        return float(vals.sum()) / (2.0 * upsilon)
    if which == 2:
        vals = _quad_gather(gram.g, cols[0], cols[1], cols[2], cols[3])
        return float(vals @ vals) / (4.0 * upsilon)
    f0 = _quad_gather(gram.g, cols[0], cols[1], cols[2], cols[3])
    f1 = _quad_gather(gram.g, cols[2], cols[3], cols[4], cols[5])
    f2 = _quad_gather(gram.g, cols[4], cols[5], cols[0], cols[1])
    return float(np.sum(f0 * f1 * f2)) / (8.0 * upsilon)


def _a_star_enumerate(gram: _Gram, which: int, cap: int) -> float:
    design = gram.design
    count = math.prod(_shared_tuple_count(n, which) for n in design.sizes)
    _check_cap(count, cap, f"enumerating the order-{which} subsampled estimator")
    if which == 1:
        per_group = [_sorted_pairs(n) for n in design.sizes]
        slots = [(0, 1)]
        norm_const = 2.0
    elif which == 2:
        per_group = [
            _expand_pairs(_pair_quadruples(n), _sorted_pairs(n)) for n in design.sizes
        ]
        slots = [(0, 1), (2, 3)]
        norm_const = 4.0
    else:
        per_group = [
            _expand_pairs(_ordered_sixtuples(n), _ordered_pairs(n)) for n in design.sizes
        ]
        slots = [(0, 1), (2, 3), (4, 5)]
        norm_const = 8.0
    sizes = [len(p) for p in per_group]

    total = 0.0
    for start in range(0, count, _CHUNK):
        ids = np.arange(start, min(count, start + _CHUNK))
        digits = _mixed_radix(ids, sizes)
        tuples = [
            gram.row_off[i] + per_group[i][dig] for i, dig in enumerate(digits)
        ]
        cols = [
            np.column_stack([tup[:, k] for tup in tuples])
            for k in range(2 * len(slots))
        ]
        if which == 1:
            total += float(_quad_gather(gram.g, cols[0], cols[1], cols[0], cols[1]).sum())
        elif which == 2:
            vals = _quad_gather(gram.g, cols[0], cols[1], cols[2], cols[3])
            total += float(vals @ vals)
        else:
            f0 = _quad_gather(gram.g, cols[0], cols[1], cols[2], cols[3])
            f1 = _quad_gather(gram.g, cols[2], cols[3], cols[4], cols[5])
            f2 = _quad_gather(gram.g, cols[4], cols[5], cols[0], cols[1])
            total += float(np.sum(f0 * f1 * f2))
    return total / (norm_const * count)


def _expand_pairs(id_rows: np.ndarray, pair_list: np.ndarray) -> np.ndarray:
    """Turn rows of pair ids into rows of flat indices (2 per pair)."""
    flat = pair_list[id_rows]  # (rows, slots, 2)
    return flat.reshape(len(id_rows), -1)


def _shared_tuple_count(n: int, which: int) -> int:
    if which == 1:
        return math.comb(n, 2)
    if which == 2:
        return 6 * math.comb(n, 4)
    return math.perm(n, 6)


# ---------------------------------------------------------------------------
# permutation-mixed estimators


def _collapsed_gram(gram: _Gram, local_rows: list[np.ndarray]) -> np.ndarray:
    """n_min x n_min Gram of permutation-mapped shared indices.

    ``local_rows[i]`` holds the group-i observation index for each shared
    index; the result sums the Gram over all group pairs, so mixed-kernel
    values become four-entry gathers from it.
    """
    glob = np.concatenate([gram.row_off[i] + local_rows[i] for i in range(gram.design.a)])
    m = len(local_rows[0])
    sel = gram.g[np.ix_(glob, glob)]
    a = gram.design.a
    return sel.reshape(a, m, a, m).sum(axis=(0, 2))


def _b_minima(need) -> dict[int, int]:
    req = {1: 2, 2: 4, 3: 6}
    return {order: req[order] for order in need}


def b_estimators(sample: GroupedSample, t: BlockMatrix, upsilon: int,
                 perms: PermutationSet, need: tuple[int, ...] = (1, 2, 3)) -> TraceEstimates:
    """Permutation-mixed exact estimators of the three traces.

    Shared indices run over 0..n_min-1 and are pushed through each
    group's permutation, so unbalanced groups still contribute all their
    observations across the `upsilon` repetitions. Unbiased for every
    choice of `upsilon`.
    """
    design = sample.design
    if upsilon < 1:
        raise ValueError("upsilon must be >= 1")
    if perms.design.sizes != design.sizes:
        raise ValueError("permutation set was drawn for a different design")
    m = design.n_min
    for order, minimum in _b_minima(need).items():
        if m < minimum:
            raise ValueError(
                f"order-{order} mixed estimator needs min(n_i) >= {minimum}, have {m}"
            )
    gram = _row_gram(sample, t)
    tables = perms.table(upsilon, m)

    pairs = _sorted_pairs(m) if (2 in need or 3 in need) else None
    disjoint = _pair_disjoint(m) if (2 in need or 3 in need) else None

    sum1 = sum2 = sum3 = 0.0
    for j in range(upsilon):
        gc = _collapsed_gram(gram, [tab[j] for tab in tables])
        if 1 in need:
            sum1 += m * float(np.trace(gc)) - float(gc.sum())
        if 2 in need or 3 in need:
            k = (
                gc[np.ix_(pairs[:, 0], pairs[:, 0])]
                - gc[np.ix_(pairs[:, 0], pairs[:, 1])]
                - gc[np.ix_(pairs[:, 1], pairs[:, 0])]
                + gc[np.ix_(pairs[:, 1], pairs[:, 1])]
            )
            if 2 in need:
                sum2 += float(np.sum(np.where(disjoint, k * k, 0.0)))
            if 3 in need:
                masked = np.where(disjoint, k, 0.0)
                sum3 += float(np.sum((masked @ masked) * masked))

    t1 = sum1 / (math.comb(m, 2) * 2.0 * upsilon) if 1 in need else None
    t2 = sum2 / (6.0 * math.comb(m, 4) * 4.0 * upsilon) if 2 in need else None
    t3 = sum3 / (math.perm(m, 6) * float(upsilon)) if 3 in need else None
    if t1 is None:
        raise ValueError("the mixed estimators always compute the first-order trace")
    return TraceEstimates(t1, t2, t3, family="B", upsilon={"upsilon": upsilon})


def b_star(sample: GroupedSample, t: BlockMatrix, upsilon1, upsilon2: int,
           perms: PermutationSet, index_source: IndexSource,
           need: tuple[int, ...] = (1, 2, 3),
           cap: int = DEFAULT_ENUMERATION_CAP) -> TraceEstimates:
    """Subsampled permutation-mixed estimators.

    For each of the first `upsilon1` permutations, `upsilon2` fresh shared
    index tuples are drawn and the kernels averaged with plain
    ``1/(norm * upsilon1 * upsilon2)`` normalizers. `upsilon1` may be a
    single count or one count per trace order. An enumerating source
    walks all shared tuples and reproduces ``b_estimators`` exactly.
    """
    design = sample.design
    m = design.n_min
    for order, minimum in _b_minima(need).items():
        if m < minimum:
            raise ValueError(
                f"order-{order} mixed estimator needs min(n_i) >= {minimum}, have {m}"
            )
    if isinstance(upsilon1, (tuple, list)):
        u1 = {order: int(u) for order, u in zip((1, 2, 3), upsilon1)}
    else:
        u1 = {order: int(upsilon1) for order in (1, 2, 3)}
    if any(u1[order] < 1 for order in need):
        raise ValueError("upsilon1 must be >= 1")
    if index_source.kind == "random" and upsilon2 < 1:
        raise ValueError("upsilon2 must be >= 1")
    max_u1 = max(u1[order] for order in need)
    if perms.design.sizes != design.sizes:
        raise ValueError("permutation set was drawn for a different design")
    gram = _row_gram(sample, t)
    tables = perms.table(max_u1, m)  # per group: (max_u1, m) local rows
    rows = np.stack(
        [gram.row_off[i] + tab for i, tab in enumerate(tables)], axis=1
    )  # (max_u1, a, m)

    norms = {1: 2.0, 2: 4.0, 3: 8.0}
    out = {1: None, 2: None, 3: None}
    used_u2 = {}
    for order in need:
        m_k = _ORDER_M[order]
        count_j = u1[order]
        if index_source.kind == "enumerate":
            reps = _shared_tuple_count(m, order)
            _check_cap(
                count_j * reps, cap,
                f"enumerating the order-{order} subsampled mixed estimator",
            )
            if order == 1:
                shared = _sorted_pairs(m)
            elif order == 2:
                shared = _expand_pairs(_pair_quadruples(m), _sorted_pairs(m))
            else:
                shared = _expand_pairs(_ordered_sixtuples(m), _ordered_pairs(m))
            j_ids = np.repeat(np.arange(count_j), reps)
            sigma = np.tile(shared, (count_j, 1))
        else:
            reps = upsilon2
            j_ids = np.repeat(np.arange(count_j), reps)
            sigma = _draw_distinct(index_source.rng, m, m_k, count_j * reps)
        used_u2[order] = reps
        total = 0.0
        for start in range(0, len(j_ids), _CHUNK):
            sel = slice(start, min(len(j_ids), start + _CHUNK))
            cols = [rows[j_ids[sel], :, sigma[sel, k]] for k in range(m_k)]
            if order == 1:
                vals = _quad_gather(gram.g, cols[0], cols[1], cols[0], cols[1])
                total += float(vals.sum())
            elif order == 2:
                vals = _quad_gather(gram.g, cols[0], cols[1], cols[2], cols[3])
                total += float(vals @ vals)
            else:
                f0 = _quad_gather(gram.g, cols[0], cols[1], cols[2], cols[3])
                f1 = _quad_gather(gram.g, cols[2], cols[3], cols[4], cols[5])
                f2 = _quad_gather(gram.g, cols[4], cols[5], cols[0], cols[1])
                total += float(np.sum(f0 * f1 * f2))
        out[order] = total / (norms[order] * count_j * reps)

    if out[1] is None:
        raise ValueError("the mixed estimators always compute the first-order trace")
    return TraceEstimates(
        out[1], out[2], out[3], family="Bstar",
        upsilon={"upsilon1": tuple(u1[o] for o in (1, 2, 3)), "upsilon2": used_u2},
    )
