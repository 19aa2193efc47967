"""Monte Carlo experiments, data ingestion, and result persistence.

An ExperimentConfig (usually parsed from a TOML file) describes a grid
of total dimensions, group sizes, and estimator flavors; run_experiment
simulates null data on that grid, applies the decision rules, and
writes one CSV row per (grid point, flavor, rule) with the observed
rejection rate and its 99% binomial interval.

Determinism contract: all replication randomness is keyed positionally
by (seed, group, replication index), and per-point tallies are integer
sums over replications, so the same configuration produces
byte-identical CSV output for any worker count.
"""

from __future__ import annotations

import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dists import normal_quantile
from .errors import DataFormatError, HypothesisValidationError
from .hypothesis import (
    BlockMatrix,
    canned_scenario,
    scenario_a_matrix,
    scenario_b_matrix,
    validate_hypothesis,
)
from .inference import EstimatorConfig, TestReport, fp_regime_diagnostic, run_test
from .model import (
    CovarianceModel,
    GroupedSample,
    StudyDesign,
    ar,
    compound_symmetry,
    replication_streams,
    sample as draw_sample,
    scaled_ar,
)
from .moments import build_vn

WORKERS_ENV = "HDSPLIT_WORKERS"

CSV_COLUMNS = (
    "scenario", "D", "d1", "d2", "n1", "n2", "flavor", "rule",
    "rejection_rate", "replications", "binomial_ci_low", "binomial_ci_high",
    "seed", "wall_time",
)

_CI_LEVEL = 0.99


@dataclass(frozen=True)
class ResultRow:
    """One rejection rate at one grid point, flavor, and rule.

    wall_time is carried for interactive display but written to the CSV
    as an empty field so equal configurations yield identical bytes.
    """

    scenario: str
    d_total: int
    d1: int
    d2: int
    n1: int
    n2: int
    flavor: str
    rule: str
    rejection_rate: float
    replications: int
    binomial_ci_low: float
    binomial_ci_high: float
    seed: int
    wall_time: float | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    """Grid description for a type-I-error study.

    Scenarios "A" and "B" are two-group designs whose dimensions come
    from `d_grid` and the split rule; scenario "custom" instead takes
    explicit `dims`, per-group covariance strings, and a hypothesis
    matrix file.
    """

    scenario: str
    replications: int
    master_seed: int
    sizes: tuple[tuple[int, ...], ...]
    d_grid: tuple[int, ...] = ()
    split_kind: str | None = None  # semi | proportional
    split_value: float | None = None
    dims: tuple[int, ...] | None = None  # custom scenario only
    covariances: tuple[str, ...] | None = None  # custom scenario only
    hypothesis_file: str | None = None  # custom scenario only
    alpha: float = 0.05
    flavors: tuple[str, ...] = ("Bstar",)
    rho: float = 0.6
    upsilon_a: tuple[int, int, int] | None = None
    upsilon1: tuple[int, int, int] | None = None
    upsilon2: int | None = None
    upsilon_b: int = 1
    output: str | None = None
    workers: int | None = None

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie strictly between 0 and 1")
        if not self.sizes:
            raise ValueError("at least one group-size tuple is required")
        if self.scenario in ("A", "B"):
            if not self.d_grid:
                raise ValueError("scenario A/B needs a non-empty d_grid")
            if any(len(pair) != 2 for pair in self.sizes):
                raise ValueError("scenario A/B uses two-group size pairs")
            if self.split_kind == "semi":
                d1 = int(self.split_value if self.split_value is not None else 5)
                if any(total <= d1 for total in self.d_grid):
                    raise ValueError(f"semi split needs every D > {d1}")
            elif self.split_kind == "proportional":
                frac = self.split_value
                if frac is None or not 0.0 < frac < 1.0:
                    raise ValueError("proportional split needs a fraction in (0,1)")
            else:
                raise ValueError("split must be 'semi' or 'proportional'")
        elif self.scenario == "custom":
            if not self.dims or not self.covariances or not self.hypothesis_file:
                raise ValueError(
                    "custom scenario needs dims, covariances, and hypothesis_file"
                )
            if len(self.covariances) != len(self.dims):
                raise ValueError("one covariance string per group is required")
            if any(len(tup) != len(self.dims) for tup in self.sizes):
                raise ValueError("size tuples must match the number of groups")
        else:
            raise ValueError("scenario must be 'A', 'B', or 'custom'")

    def dims_for(self, total: int) -> tuple[int, int]:
        if self.split_kind == "semi":
            d1 = int(self.split_value if self.split_value is not None else 5)
        else:
            d1 = int(round(self.split_value * total))
        d1 = max(1, min(total - 1, d1))
        return d1, total - d1

    def estimator_config(self) -> EstimatorConfig:
        return EstimatorConfig(
            upsilon_a=self.upsilon_a,
            upsilon1=self.upsilon1,
            upsilon2=self.upsilon2,
            upsilon_b=self.upsilon_b,
        )


def _parse_covariance(spec: str, dim: int) -> CovarianceModel:
    head, _, arg = spec.partition(":")
    head = head.strip().lower()
    if head == "cs":
        return compound_symmetry(dim, jfactor=float(arg) if arg else None)
    if head == "ar":
        return ar(dim, float(arg) if arg else 0.6)
    if head == "scaled_ar":
        return scaled_ar(dim, float(arg) if arg else 0.6)
    raise ValueError(f"unknown covariance spec {spec!r}")


def _toml_module():
    if sys.version_info >= (3, 11):
        import tomllib
        return tomllib
    import tomli
    return tomli


_CONFIG_KEYS = {
    "scenario", "replications", "master_seed", "sizes", "d_grid", "split",
    "split_value", "dims", "covariances", "hypothesis_file", "alpha",
    "flavors", "rho", "upsilon_a", "upsilon1", "upsilon2", "upsilon_b",
    "output", "workers",
}


def parse_config(path: str) -> ExperimentConfig:
    """Read an ExperimentConfig from a TOML file."""
    with open(path, "rb") as fh:
        raw = _toml_module().load(fh)
    return config_from_mapping(raw)


def config_from_mapping(raw: dict) -> ExperimentConfig:
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
    missing = {"scenario", "replications", "master_seed", "sizes"} - set(raw)
    if missing:
        raise ValueError(f"missing config keys: {', '.join(sorted(missing))}")

    def tup3(key):
        value = raw.get(key)
        if value is None:
            return None
        if isinstance(value, (int, float)):
            return (int(value),) * 3
        if len(value) != 3:
            raise ValueError(f"{key} needs three entries (one per trace order)")
        return tuple(int(v) for v in value)

    return ExperimentConfig(
        scenario=str(raw["scenario"]),
        replications=int(raw["replications"]),
        master_seed=int(raw["master_seed"]),
        sizes=tuple(tuple(int(n) for n in pair) for pair in raw["sizes"]),
        d_grid=tuple(int(d) for d in raw.get("d_grid", ())),
        split_kind=raw.get("split"),
        split_value=(
            float(raw["split_value"]) if raw.get("split_value") is not None else None
        ),
        dims=tuple(int(d) for d in raw["dims"]) if raw.get("dims") else None,
        covariances=tuple(raw["covariances"]) if raw.get("covariances") else None,
        hypothesis_file=raw.get("hypothesis_file"),
        alpha=float(raw.get("alpha", 0.05)),
        flavors=tuple(raw.get("flavors", ("Bstar",))),
        rho=float(raw.get("rho", 0.6)),
        upsilon_a=tup3("upsilon_a"),
        upsilon1=tup3("upsilon1"),
        upsilon2=int(raw["upsilon2"]) if raw.get("upsilon2") is not None else None,
        upsilon_b=int(raw.get("upsilon_b", 1)),
        output=raw.get("output"),
        workers=int(raw["workers"]) if raw.get("workers") is not None else None,
    )


# ---------------------------------------------------------------------------
# experiment execution


@dataclass(frozen=True)
class _GridPoint:
    scenario: str
    dims: tuple[int, ...]
    sizes: tuple[int, ...]
    flavor: str
    alpha: float
    rho: float
    point_seed: int
    covariances: tuple[str, ...] | None
    hypothesis_file: str | None


def _point_materials(point: _GridPoint):
    design = StudyDesign(dims=point.dims, sizes=point.sizes)
    if point.scenario in ("A", "B"):
        scen = canned_scenario(point.scenario, design, rho=point.rho)
        return design, scen.matrix(), scen.covariances
    covs = tuple(
        _parse_covariance(spec, d) for spec, d in zip(point.covariances, design.dims)
    )
    matrix = read_matrix_csv(point.hypothesis_file)
    t = BlockMatrix(design=design, data=matrix)
    report = validate_hypothesis(t)
    if not report.passed:
        raise HypothesisValidationError(
            f"hypothesis matrix rejected: {report}", report
        )
    return design, t, covs


def _run_chunk(point: _GridPoint, est_config: EstimatorConfig,
               start: int, stop: int) -> tuple[dict, int]:
    """Rejection counts over replications [start, stop); pure function of
    its arguments, safe to run on any worker."""
    design, t, covs = _point_materials(point)
    vn = build_vn(t.design, covs) if point.flavor == "oracle" else None
    counts = {"z": 0, "chi1": 0, "kf": 0}
    missing_kf = 0
    for rep in range(start, stop):
        streams = replication_streams(point.point_seed, rep, design.a + 1)
        data = draw_sample(design, None, covs, streams[: design.a])
        report = run_test(
            data, t, alpha=point.alpha, flavor=point.flavor,
            config=est_config, seed=streams[design.a], vn=vn,
        )
        for rule in counts:
            if report.rejected(rule):
                counts[rule] += 1
        if "kf" not in report.decisions:
            missing_kf += 1
    return counts, missing_kf


def binomial_interval(successes: int, trials: int) -> tuple[float, float]:
    """Normal-approximation binomial interval at the 99% level."""
    rate = successes / trials
    halfwidth = float(
        normal_quantile(0.5 + _CI_LEVEL / 2.0)
        * math.sqrt(max(rate * (1.0 - rate), 0.0) / trials)
    )
    return max(0.0, rate - halfwidth), min(1.0, rate + halfwidth)


def _resolve_workers(config: ExperimentConfig, workers: int | None) -> int:
    if workers is None:
        env = os.environ.get(WORKERS_ENV)
        if env is not None:
            workers = int(env)
    if workers is None:
        workers = config.workers
    return max(1, workers or 1)


def _grid_points(config: ExperimentConfig):
    if config.scenario == "custom":
        dims_list = [config.dims]
    else:
        dims_list = [config.dims_for(total) for total in config.d_grid]
    index = 0
    for dims in dims_list:
        for sizes in config.sizes:
            for flavor in config.flavors:
                seed = int(
                    np.random.SeedSequence(
                        config.master_seed, spawn_key=(index,)
                    ).generate_state(1, np.uint64)[0]
                )
                yield _GridPoint(
                    scenario=config.scenario, dims=tuple(dims), sizes=tuple(sizes),
                    flavor=flavor, alpha=config.alpha, rho=config.rho,
                    point_seed=seed, covariances=config.covariances,
                    hypothesis_file=config.hypothesis_file,
                )
                index += 1


def run_experiment(config: ExperimentConfig, workers: int | None = None,
                   progress=None) -> list[ResultRow]:
    """Run the whole grid and return one row per (point, flavor, rule).

    Rows come back in grid order; when `config.output` is set they are
    also written as CSV. `progress`, if given, is called with a status
    string after each grid point.
    """
    workers = _resolve_workers(config, workers)
    est_config = config.estimator_config()
    reps = config.replications
    rows: list[ResultRow] = []
    for point in _grid_points(config):
        began = time.perf_counter()
        if workers == 1:
            counts, missing = _run_chunk(point, est_config, 0, reps)
        else:
            step = max(1, math.ceil(reps / (workers * 4)))
            spans = [(s, min(reps, s + step)) for s in range(0, reps, step)]
            counts = {"z": 0, "chi1": 0, "kf": 0}
            missing = 0
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = [
                    pool.submit(_run_chunk, point, est_config, s, e) for s, e in spans
                ]
                for fut in futures:
                    part, part_missing = fut.result()
                    for rule in counts:
                        counts[rule] += part[rule]
                    missing += part_missing
        elapsed = time.perf_counter() - began
        if missing:
            print(
                f"note: {missing}/{reps} replications lacked the kf rule at "
                f"dims={point.dims}, sizes={point.sizes}, flavor={point.flavor}",
                file=sys.stderr,
            )
        d1, d2 = (point.dims + (0,))[:2]
        n1, n2 = (point.sizes + (0,))[:2]
        for rule in ("z", "chi1", "kf"):
            low, high = binomial_interval(counts[rule], reps)
            rows.append(
                ResultRow(
                    scenario=point.scenario, d_total=sum(point.dims),
                    d1=d1, d2=d2, n1=n1, n2=n2, flavor=point.flavor, rule=rule,
                    rejection_rate=counts[rule] / reps, replications=reps,
                    binomial_ci_low=low, binomial_ci_high=high,
                    seed=point.point_seed, wall_time=elapsed,
                )
            )
        if progress is not None:
            progress(
                f"dims={point.dims} sizes={point.sizes} flavor={point.flavor} "
                f"done in {elapsed:.1f}s"
            )
    if config.output:
        write_rows(config.output, rows)
    return rows


def write_rows(path: str, rows: list[ResultRow]) -> None:
    """CSV with the ResultRow schema: UTF-8, LF endings, header included.

    wall_time is left empty so reruns of the same configuration produce
    identical bytes.
    """
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([
                row.scenario, row.d_total, row.d1, row.d2, row.n1, row.n2,
                row.flavor, row.rule, repr(row.rejection_rate), row.replications,
                repr(row.binomial_ci_low), repr(row.binomial_ci_high),
                row.seed, "",
            ])


# ---------------------------------------------------------------------------
# data ingestion and the single-dataset entry point


def _read_group_csv(path: str, skip_header: bool) -> np.ndarray:
    rows = []
    width = None
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        for lineno, cells in enumerate(reader, start=1):
            if skip_header and lineno == 1:
                continue
            if not cells or (len(cells) == 1 and not cells[0].strip()):
                continue
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise DataFormatError(
                    f"{path}, line {lineno}: expected {width} columns, found {len(cells)}"
                )
            try:
                rows.append([float(c) for c in cells])
            except ValueError:
                raise DataFormatError(
                    f"{path}, line {lineno}: non-numeric cell"
                ) from None
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    if len(rows) < 2:
        raise DataFormatError(f"{path}: a group needs at least 2 observations")
    return np.asarray(rows, dtype=float)


def ingest_data(manifest, skip_header: bool = False) -> GroupedSample:
    """Load a grouped sample from per-group CSV files.

    `manifest` is either a path to a text file listing one group CSV per
    line (relative paths resolve against the manifest's directory), or a
    sequence of file paths. Dimensions and sizes are inferred.
    """
    if isinstance(manifest, (str, os.PathLike)):
        base = os.path.dirname(os.path.abspath(manifest))
        try:
            with open(manifest, "r", encoding="utf-8") as fh:
                lines = [ln.strip() for ln in fh]
        except OSError as exc:
            raise DataFormatError(f"cannot read manifest {manifest}: {exc}") from exc
        paths = [
            ln if os.path.isabs(ln) else os.path.join(base, ln)
            for ln in lines
            if ln and not ln.startswith("#")
        ]
    else:
        paths = [os.fspath(p) for p in manifest]
    if not paths:
        raise DataFormatError("manifest lists no group files")
    groups = tuple(_read_group_csv(p, skip_header) for p in paths)
    design = StudyDesign(
        dims=tuple(g.shape[1] for g in groups),
        sizes=tuple(g.shape[0] for g in groups),
    )
    return GroupedSample(design=design, groups=groups)


def write_group_csv(path: str, values: np.ndarray) -> None:
    """One observation per row, plain numeric CSV (round-trips ingest_data)."""
    values = np.asarray(values, dtype=float)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in np.atleast_2d(values):
            writer.writerow([repr(float(x)) for x in row])


def read_matrix_csv(path: str) -> np.ndarray:
    """Dense numeric matrix from CSV; all rows must have equal length."""
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        for lineno, cells in enumerate(reader, start=1):
            if not cells or (len(cells) == 1 and not cells[0].strip()):
                continue
            if rows and len(cells) != len(rows[0]):
                raise DataFormatError(
                    f"{path}, line {lineno}: expected {len(rows[0])} columns, "
                    f"found {len(cells)}"
                )
            try:
                rows.append([float(c) for c in cells])
            except ValueError:
                raise DataFormatError(f"{path}, line {lineno}: non-numeric cell") from None
    if not rows:
        raise DataFormatError(f"{path}: empty matrix")
    return np.asarray(rows, dtype=float)


def hypothesis_from_source(source: str, design: StudyDesign) -> BlockMatrix:
    """Resolve a scenario label or matrix CSV path against a design."""
    if source == "A":
        return scenario_a_matrix(design)
    if source == "B":
        return scenario_b_matrix(design)
    matrix = read_matrix_csv(source)
    t = BlockMatrix(design=design, data=matrix)
    report = validate_hypothesis(t)
    if not report.passed:
        raise HypothesisValidationError(
            f"hypothesis matrix rejected: {report}", report
        )
    return t


def analyze(manifest, hypothesis_source: str, alpha: float = 0.05,
            flavor: str = "Bstar", seed: int | None = None,
            skip_header: bool = False,
            est_config: EstimatorConfig | None = None) -> tuple[TestReport, dict]:
    """Test one ingested dataset; returns the report and a JSON-ready record."""
    data = ingest_data(manifest, skip_header=skip_header)
    t = hypothesis_from_source(hypothesis_source, data.design)
    report = run_test(data, t, alpha=alpha, flavor=flavor, config=est_config, seed=seed)
    record = report_record(report, data.design, seed=seed, hypothesis=hypothesis_source)
    return report, record


def report_record(report: TestReport, design: StudyDesign, seed=None,
                  hypothesis: str | None = None) -> dict:
    traces = {
        "t1": report.traces.t1,
        "t2": report.traces.t2,
        "t3": report.traces.t3,
        "family": report.traces.family,
        "upsilon": report.traces.upsilon,
    }
    return {
        "statistic": report.statistic,
        "flavor": report.flavor,
        "alpha": report.alpha,
        "traces": traces,
        "fhat": report.fhat,
        "regime": fp_regime_diagnostic(report.fhat) if report.fhat is not None else None,
        "quantiles": report.quantiles,
        "decisions": report.decisions,
        "diagnostic": report.diagnostic,
        "seed": seed,
        "hypothesis": hypothesis,
        "dims": list(design.dims),
        "sizes": list(design.sizes),
    }


def format_report(report: TestReport) -> str:
    """Human-readable rendering of a TestReport."""
    lines = [f"flavor {report.flavor}, alpha {report.alpha:g}"]
    if report.statistic is None:
        lines.append("statistic unavailable")
    else:
        lines.append(f"statistic W = {report.statistic:.6g}")
    tr = report.traces
    t2 = "n/a" if tr.t2 is None else f"{tr.t2:.6g}"
    t3 = "n/a" if tr.t3 is None else f"{tr.t3:.6g}"
    lines.append(f"traces ({tr.family}): t1 = {tr.t1:.6g}, t2 = {t2}, t3 = {t3}")
    if report.fhat is not None:
        lines.append(
            f"degrees of freedom = {report.fhat:.6g} ({fp_regime_diagnostic(report.fhat)})"
        )
    for rule in ("z", "chi1", "kf"):
        if rule in report.decisions:
            lines.append(
                f"rule {rule:>4}: threshold {report.quantiles[rule]:+.6f} "
                f"-> {report.decisions[rule]}"
            )
    if report.diagnostic:
        lines.append(f"note: {report.diagnostic}")
    return "\n".join(lines)


def save_record(path: str, record: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")
