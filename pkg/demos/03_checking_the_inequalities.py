"""
Numerical checks of the supporting inequalities
===============================================

Each suite evaluates one inequality on seeded random instances and
reports the observed value, the bound and the margin.
"""

from truncdens import LogDensity, SurvivalSet, TruncatedDensity, kl_divergence, tv_distance
from truncdens.verify import check_taylor_remainder, format_table, run_suite

# Taylor remainder of sin(10 x) at degree 30
print(check_taylor_remainder(LogDensity.sin10(), 30).to_dict())

# Pinsker on a single pair
S = SurvivalSet.interval(0.0, 0.5)
P = TruncatedDensity(LogDensity.sin10(), S)
Q = TruncatedDensity(LogDensity.exp_scaled(1.0), S)
print(f"\nTV = {tv_distance(P, Q):.4f} <= sqrt(KL) = {kl_divergence(P, Q) ** 0.5:.4f}")

# the quick suites; "distortion" and "pinsker" take a few more seconds
reports = run_suite(["taylor", "multiindex", "kl_supnorm"])
print()
print(format_table(reports))
print(f"\n{sum(r.passed for r in reports)}/{len(reports)} checks pass")
