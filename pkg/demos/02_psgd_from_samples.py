"""
Fitting from samples with projected SGD
=======================================

A random cubic log-density is observed on ``[0, 1/2]``.  Projected SGD
over the set of polynomials with ``sup |q| <= C`` uses one sample per
step; the averaged iterate is compared with the truth on ``[0, 1]``.
"""

import numpy as np

from truncdens import FitConfig, LogDensity, SurvivalSet, psgd_fit, sample_target
from truncdens._rng import derive_rng
from truncdens.verify import random_poly

S = SurvivalSet.interval(0.0, 0.5)
truth = random_poly(derive_rng(2024, "truth"), 1, 3, 1.0)
f = LogDensity.from_poly(truth)
print("true coefficients (x, x^2, x^3):", np.round(truth.v, 4))

# the step size shrinks like 1/sqrt(T).  A single seed is noisy; the
# median KL over 20 seeds falls with T (see tests/test_acceptance.py)
for T in (1_000, 10_000, 100_000):
    data, stats = sample_target(f, S, T, seed=7)
    cfg = FitConfig(k=3, C=3.0, T=T, eta=0.15 * np.sqrt(1e5 / T), seed=7)
    report = psgd_fit(data, S, cfg, target=f)
    print(f"T={T:>6}: coeffs {np.round(report.coeffs.v, 3)}  "
          f"KL on S {report.final_kl_on_S:.2e}  TV on [0,1] {report.tv_on_K:.3f}  "
          f"projections {report.projection_count}")

# with the worst-case step size from the convergence analysis (eta=None)
# nearly every step leaves the feasible set and gets projected back
data, _ = sample_target(f, S, 2_000, seed=7)
report = psgd_fit(data, S, FitConfig(k=3, C=3.0, T=2_000, seed=7), target=f)
print(f"\ndefault step size {report.eta:.3g}: {report.projection_count} projections "
      f"in {report.steps} steps, TV on [0,1] {report.tv_on_K:.3f}")
