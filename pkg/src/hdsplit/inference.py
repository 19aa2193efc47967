"""Standardized test statistics and decision rules.

One dataset plus one hypothesis matrix yields a TestReport: the
standardized quadratic form, the trace estimates behind it, the
moment-matched degrees of freedom, and accept/reject decisions under
three interchangeable calibrations of the same statistic:

* rule "z": compare against the standard normal quantile,
* rule "chi1": against the standardized chi-square(1) quantile,
* rule "kf": against the standardized chi-square quantile with
  estimated degrees of freedom, which interpolates between the
  other two as the eigenvalue spread of TV_N varies.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import estimators as est
from .dists import chisq_quantile, kf_quantile, normal_quantile
from .errors import DegenerateVarianceError
from .hypothesis import BlockMatrix
from .model import GroupedSample
from .moments import exact_moments, q_statistic, spectral_summary

RULES = ("z", "chi1", "kf")
FLAVORS = ("A", "Astar", "B", "Bstar", "oracle")


@dataclass(frozen=True)
class EstimatorConfig:
    """Tuning knobs for the trace estimators used by run_test.

    `upsilon_a` (subsample counts for the A-star flavor) and `upsilon1`
    (permutation counts for the B-star flavor) accept one integer per
    trace order or a single shared value; None selects the default
    policy (5N, 10N, 100N) for orders one to three. `upsilon2` is the
    number of index tuples per permutation, default 10. `upsilon_b`
    repeats the exact mixed estimator over that many permutations.
    With `enumerate_indices` the star flavors walk all index
    combinations instead of sampling them.
    """

    upsilon_a: int | tuple[int, int, int] | None = None
    upsilon1: int | tuple[int, int, int] | None = None
    upsilon2: int | None = None
    upsilon_b: int = 1
    enumerate_indices: bool = False
    cap: int = est.DEFAULT_ENUMERATION_CAP

    def policy(self, which, total_size: int) -> tuple[int, int, int]:
        value = self.upsilon_a if which == "a" else self.upsilon1
        if value is None:
            return (5 * total_size, 10 * total_size, 100 * total_size)
        if isinstance(value, (tuple, list)):
            if len(value) != 3:
                raise ValueError("per-order upsilon needs exactly three entries")
            return tuple(int(v) for v in value)
        return (int(value),) * 3

    @property
    def tuples_per_perm(self) -> int:
        return 10 if self.upsilon2 is None else int(self.upsilon2)


@dataclass(frozen=True)
class TestReport:
    """Outcome of one standardized test on one dataset."""

    statistic: float | None
    flavor: str
    traces: est.TraceEstimates
    fhat: float | None
    alpha: float
    quantiles: dict[str, float] = field(default_factory=dict)
    decisions: dict[str, str] = field(default_factory=dict)
    diagnostic: str | None = None

    def rejected(self, rule: str) -> bool:
        return self.decisions.get(rule) == "reject"


def w_statistic(q: float, traces: est.TraceEstimates) -> float:
    """Standardized statistic (q - t1) / sqrt(2 t2)."""
    if traces.t2 is None or traces.t2 <= 0.0:
        raise DegenerateVarianceError(
            f"second-order trace estimate {traces.t2} is not positive"
        )
    return (q - traces.t1) / np.sqrt(2.0 * traces.t2)


def critical_value(rule: str, alpha: float, fhat: float | None = None) -> float:
    """Rejection threshold on the standardized scale."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie strictly between 0 and 1")
    if rule == "z":
        return float(normal_quantile(1.0 - alpha))
    if rule == "chi1":
        return float((chisq_quantile(1.0 - alpha, 1.0) - 1.0) / np.sqrt(2.0))
    if rule == "kf":
        if fhat is None:
            raise ValueError("rule kf needs a degrees-of-freedom estimate")
        return float(kf_quantile(1.0 - alpha, fhat))
    raise ValueError(f"unknown rule {rule!r}")


def fp_regime_diagnostic(fhat: float) -> str:
    """Crude label for where the null distribution sits.

    Small degrees of freedom put the statistic near the standardized
    chi-square(1) law, large ones near the normal; the bands are
    reporting aids only and no decision depends on them.
    """
    if fhat < 1.0:
        raise ValueError("degrees-of-freedom estimates are floored at 1")
    if fhat <= 1.2:
        return "near_chi1"
    if fhat >= 50.0:
        return "near_normal"
    return "intermediate"


def _flavor_traces(sample: GroupedSample, t: BlockMatrix, flavor: str,
                   config: EstimatorConfig, rng: np.random.Generator,
                   vn: BlockMatrix | None) -> est.TraceEstimates:
    design = sample.design
    want_t3 = design.n_min >= 6

    if flavor == "oracle":
        if vn is None:
            raise ValueError("the oracle flavor needs the true covariance block matrix")
        mean, variance = exact_moments(t, vn)
        summary = spectral_summary(t, vn)
        return est.TraceEstimates(mean, variance / 2.0, summary.t3, family="exact")

    if flavor == "A":
        t3 = est.a3_full(sample, t, cap=config.cap) if want_t3 else None
        return est.TraceEstimates(
            est.a1_full(sample, t, cap=config.cap),
            est.a2_full(sample, t, cap=config.cap),
            t3,
            family="A",
        )

    if flavor == "Astar":
        ups = config.policy("a", design.total_size)
        source = (
            est.IndexSource("enumerate")
            if config.enumerate_indices
            else est.IndexSource("random", rng)
        )
        t3 = (
            est.a_star(sample, t, 3, ups[2], source, cap=config.cap)
            if want_t3
            else None
        )
        return est.TraceEstimates(
            est.a_star(sample, t, 1, ups[0], source, cap=config.cap),
            est.a_star(sample, t, 2, ups[1], source, cap=config.cap),
            t3,
            family="Astar",
            upsilon={"upsilon": ups},
        )

    need = (1, 2, 3) if want_t3 else (1, 2)
    if flavor == "B":
        perms = est.draw_permutations(design, config.upsilon_b, rng)
        return est.b_estimators(sample, t, config.upsilon_b, perms, need=need)

    if flavor == "Bstar":
        ups = config.policy("b", design.total_size)
        perms = est.draw_permutations(design, max(ups[k - 1] for k in need), rng)
        source = (
            est.IndexSource("enumerate")
            if config.enumerate_indices
            else est.IndexSource("random", rng)
        )
        return est.b_star(
            sample, t, ups, config.tuples_per_perm, perms, source,
            need=need, cap=config.cap,
        )

    raise ValueError(f"unknown flavor {flavor!r}; choose one of {FLAVORS}")


def run_test(sample: GroupedSample, t: BlockMatrix, alpha: float = 0.05,
             flavor: str = "Bstar", config: EstimatorConfig | None = None,
             seed=None, vn: BlockMatrix | None = None) -> TestReport:
    """Run one standardized test and apply all applicable decision rules.

    `seed` feeds a fresh Generator (an existing Generator is used as is),
    so results are reproducible; the estimator flavors and their tuning
    live in `config`. The kf rule is skipped when no third-order trace
    is available. A non-positive variance estimate produces a report
    with empty decisions and a diagnostic instead of raising.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie strictly between 0 and 1")
    config = config or EstimatorConfig()
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

    q = q_statistic(sample, t)
    traces = _flavor_traces(sample, t, flavor, config, rng, vn)

    try:
        w = w_statistic(q, traces)
    except DegenerateVarianceError as exc:
        return TestReport(
            statistic=None, flavor=flavor, traces=traces, fhat=None,
            alpha=alpha, diagnostic=str(exc),
        )

    fhat = None
    diagnostic = None
    if traces.t3 is not None:
        try:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always", RuntimeWarning)
                fhat = est.fhat_pearson(traces)
            if caught:
                diagnostic = str(caught[0].message)
        except DegenerateVarianceError as exc:
            diagnostic = f"kf rule skipped: {exc}"
    elif sample.design.n_min < 6:
        diagnostic = (
            "kf rule skipped: third-order trace needs at least 6 observations "
            "in every group"
        )

    quantiles = {
        "z": critical_value("z", alpha),
        "chi1": critical_value("chi1", alpha),
    }
    if fhat is not None:
        quantiles["kf"] = critical_value("kf", alpha, fhat)
    decisions = {
        rule: ("reject" if w > bound else "retain") for rule, bound in quantiles.items()
    }
    return TestReport(
        statistic=float(w), flavor=flavor, traces=traces, fhat=fhat,
        alpha=alpha, quantiles=quantiles, decisions=decisions,
        diagnostic=diagnostic,
    )
