"""Event accumulation amplifies threshold noise; per-event losses do not.

The accumulated target over a window of N_+ positive and N_- negative
events has variance N_+^2 s^2 + N_-^2 s^2 (independent thresholds), so its
standard deviation grows linearly with the counts, and balanced windows
keep a large spread around a near-zero mean.  Monte-Carlo draws confirm
the closed form to better than 1%.
"""

import numpy as np

from evfield import AccumulationSpec, acc_moments, acc_monte_carlo

print(f"{'N+':>4} {'N-':>4} {'mean':>8} {'std':>8} {'mc std':>8} {'std per event':>14}")
for k in (1, 2, 5, 10, 20):
    spec = AccumulationSpec(n_pos=2 * k, n_neg=k, c_pos=0.25, c_neg=0.25,
                            sigma_pos=0.03, sigma_neg=0.03)
    mean, var = acc_moments(spec)
    _, mc_var = acc_monte_carlo(spec, 200_000, seed=k)
    n = 3 * k
    print(f"{2 * k:>4} {k:>4} {mean:>8.3f} {np.sqrt(var):>8.4f} "
          f"{np.sqrt(mc_var):>8.4f} {np.sqrt(var) / n:>14.5f}")

print("\nbalanced windows: the mean cancels but the noise does not")
for k in (1, 5, 20):
    spec = AccumulationSpec(k, k, 0.25, 0.25, 0.03, 0.03)
    mean, var = acc_moments(spec)
    print(f"  N = {k:2d} + {k:2d}: target {mean:.3f} +- {np.sqrt(var):.4f}")

print("\nperfectly correlated thresholds are the only exception")
s = 0.03
spec = AccumulationSpec(1, 1, 0.25, 0.25, s, s, cov=s * s)
mean, var = acc_moments(spec)
print(f"  cov = s^2: variance = {var:.1e}")
