"""Why the two losses generalize: the invariances, numerically.

The difference loss is unchanged under a common rescaling of thresholds and
predicted log-radiance; the gradient loss is unchanged under a rescaling of
time (i.e. the speed of motion).  The normalized target magnitude is
centered at 1 for any threshold asymmetry, so one loss weight fits all
sensors.
"""

import numpy as np

from evfield import ThresholdParams, loss_diff, loss_grad
from evfield.accumulation import normalized_targets

th = ThresholdParams(0.25, 2.5)      # a strongly asymmetric sensor

print("common-scale invariance of the difference loss:")
for k in (1e-3, 1.0, 1e3):
    val = loss_diff(k * (-0.5), -1, th.scaled(k))
    print(f"  k = {k:8.0e}: loss = {val:.12f}")

print("\nspeed invariance of the gradient loss:")
for s in (0.01, 1.0, 100.0):
    val = loss_grad(3.0 / s, +1, th, s * 1.0, s * 1.5)
    print(f"  time scale {s:6.2f}: loss = {val:.12f}")

print("\nnormalized targets are centered at 1 for any ratio:")
for ratio in (0.01, 0.1, 1.0, 10.0, 100.0):
    pos, neg, center, offset = normalized_targets(ThresholdParams.from_ratio(0.25, ratio))
    print(f"  ratio {ratio:7.2f}: +{pos:.4f} / -{neg:.4f}, center {center:.15f}, "
          f"offset {offset:+.4f}")
