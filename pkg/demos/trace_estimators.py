"""The four trace-estimator families on one data set.

Draws a single null data set and runs every estimator family against the
exact traces tr(TV_N), tr((TV_N)^2), tr((TV_N)^3):

  A      exact U-statistics over all index tuples
  A*     the same kernels over randomly subsampled tuples
  B      permutation-mixed exact estimators on shared indices
  B*     subsampled permutation-mixed estimators

A and B are unbiased with zero and small extra variance; the starred
versions trade accuracy for tractable cost at large n.
"""

import numpy as np

from hdsplit.estimators import (
    IndexSource,
    a1_full,
    a2_full,
    a3_full,
    a_star,
    b_estimators,
    b_star,
    draw_permutations,
)
from hdsplit.hypothesis import canned_scenario
from hdsplit.inference import EstimatorConfig
from hdsplit.model import StudyDesign, sample
from hdsplit.moments import build_vn, spectral_summary

rng = np.random.default_rng(21)

# sizes stay small enough for the exact order-3 family (its kernel count
# explodes combinatorially; the starred families are what scales)
design = StudyDesign(dims=(4, 26), sizes=(7, 8))
spec = canned_scenario("B", design)
t = spec.matrix()
smp = sample(design, None, spec.covariances, rng)

summary = spectral_summary(t, build_vn(design, spec.covariances))
print(f"exact traces: t1 {summary.t1:.3f}  t2 {summary.t2:.3f}  t3 {summary.t3:.3f}\n")

# the default subsampling policy scales tuple counts with the total
# sample size N
cfg = EstimatorConfig()
u1 = cfg.policy("a", design.total_size)
print(f"subsampling policy at N={design.total_size}: {u1} tuples, "
      f"{cfg.tuples_per_perm} per permutation\n")

src = IndexSource("random", rng=rng)
rows = [
    ("A", a1_full(smp, t), a2_full(smp, t), a3_full(smp, t)),
    ("A*",
     a_star(smp, t, 1, u1[0], src),
     a_star(smp, t, 2, u1[1], src),
     a_star(smp, t, 3, u1[2], src)),
]
b = b_estimators(smp, t, 30, draw_permutations(design, 30, rng))
rows.append(("B", b.t1, b.t2, b.t3))
bs = b_star(smp, t, u1, cfg.tuples_per_perm,
            draw_permutations(design, max(u1), rng), src)
rows.append(("B*", bs.t1, bs.t2, bs.t3))

print(f"{'family':8s} {'t1':>10s} {'t2':>12s} {'t3':>14s}")
for name, t1, t2, t3 in rows:
    print(f"{name:8s} {t1:10.3f} {t2:12.3f} {t3:14.3f}")
