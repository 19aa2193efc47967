"""Command-line entry points.

Three subcommands: `simulate` runs a Monte Carlo grid from a TOML
config, `test` applies the standardized test to CSV data, and
`validate` checks that a matrix is an admissible hypothesis projection.

Exit codes: 0 success, 2 usage or configuration error, 3 data ingestion
error, 4 numerical degeneracy (including hypothesis matrices that fail
validation).
"""

from __future__ import annotations

import argparse
import sys

from .errors import (
    DataFormatError,
    DegenerateVarianceError,
    FactorizationError,
    HypothesisValidationError,
)
from .harness import (
    analyze,
    format_report,
    parse_config,
    run_experiment,
    read_matrix_csv,
    save_record,
)
from .hypothesis import validate_hypothesis

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hdsplit",
        description=(
            "Hypothesis tests for multivariate split-plot designs whose "
            "group dimensions may exceed the sample sizes."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a Monte Carlo grid from a config file")
    sim.add_argument("--config", required=True, help="TOML experiment description")
    sim.add_argument(
        "--quiet", action="store_true", help="suppress per-point progress lines"
    )

    test = sub.add_parser("test", help="test one dataset against a hypothesis")
    test.add_argument("--data", required=True, help="manifest listing group CSV files")
    test.add_argument(
        "--hypothesis", required=True,
        help="scenario label A or B, or a CSV file with the projection matrix",
    )
    test.add_argument("--alpha", type=float, default=0.05)
    test.add_argument(
        "--flavor", default="Bstar", choices=("A", "Astar", "B", "Bstar"),
    )
    test.add_argument("--seed", type=int, default=None)
    test.add_argument(
        "--skip-header", action="store_true",
        help="ignore the first line of every group CSV",
    )
    test.add_argument("--json", default=None, help="also write the report as JSON")

    val = sub.add_parser("validate", help="check a hypothesis matrix file")
    val.add_argument("--hypothesis", required=True, help="CSV file with a square matrix")

    return parser


def _cmd_simulate(args) -> int:
    config = parse_config(args.config)
    progress = None if args.quiet else (lambda line: print(line, file=sys.stderr))
    rows = run_experiment(config, progress=progress)
    if config.output:
        print(f"wrote {len(rows)} rows to {config.output}")
    else:
        for row in rows:
            print(
                f"{row.scenario} D={row.d_total} n=({row.n1},{row.n2}) "
                f"{row.flavor}/{row.rule}: {row.rejection_rate:.4f}"
            )
    return EXIT_OK


def _cmd_test(args) -> int:
    report, record = analyze(
        args.data, args.hypothesis, alpha=args.alpha, flavor=args.flavor,
        seed=args.seed, skip_header=args.skip_header,
    )
    print(format_report(report))
    if args.json:
        save_record(args.json, record)
    if report.statistic is None:
        print("degenerate variance estimate; no decisions made", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def _cmd_validate(args) -> int:
    matrix = read_matrix_csv(args.hypothesis)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        print(f"error: matrix is {matrix.shape[0]}x{matrix.shape[1]}, not square",
              file=sys.stderr)
        return EXIT_NUMERIC
    report = validate_hypothesis(matrix)
    print(str(report))
    return EXIT_OK if report.passed else EXIT_NUMERIC


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handler = {
        "simulate": _cmd_simulate,
        "test": _cmd_test,
        "validate": _cmd_validate,
    }[args.command]
    try:
        return handler(args)
    except DataFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (HypothesisValidationError, FactorizationError, DegenerateVarianceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
