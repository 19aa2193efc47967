"""A small type-I-error study driven from Python.

Runs the simulation harness over a short dimension grid and prints the
rejection rates per decision rule. The same study is available from the
command line:

    hdsplit simulate --config demos/desk_grid.toml

The z rule grows liberal as the dimension climbs while the estimated-df
rule stays near the nominal level; demos/extended_grid.toml scales the
grid up to D = 1200 with three sample-size pairs for a long run.
"""

from hdsplit.harness import ExperimentConfig, run_experiment

config = ExperimentConfig(
    scenario="B",
    replications=1000,
    master_seed=2024,
    sizes=((10, 15),),
    d_grid=(20, 60, 120),
    split_kind="semi",
    split_value=5,
    flavors=("Bstar",),
)

rows = run_experiment(config, progress=print)

print(f"\n{'D':>5s} {'rule':>5s} {'rate':>7s} {'99% interval':>18s}")
for row in rows:
    print(
        f"{row.d_total:5d} {row.rule:>5s} {row.rejection_rate:7.4f} "
        f"[{row.binomial_ci_low:.4f}, {row.binomial_ci_high:.4f}]"
    )
