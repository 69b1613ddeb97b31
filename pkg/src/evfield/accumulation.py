"""Moments of accumulated-event targets, with Monte-Carlo verification.

Accumulating N_p events of each polarity at a pixel turns the per-event
threshold noise into target noise with standard deviation that grows
linearly in the counts; these helpers make that statement executable.  The
per-pixel threshold pair may be correlated; the covariance appears only
here because nothing else in the toolkit depends on it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidCovariance
from .thresholds import ThresholdParams


@dataclass(frozen=True)
class AccumulationSpec:
    """Counts, thresholds and threshold-noise model for one accumulation."""

    n_pos: int
    n_neg: int
    c_pos: float
    c_neg: float
    sigma_pos: float
    sigma_neg: float
    cov: float = 0.0

    def __post_init__(self):
        if self.n_pos < 0 or self.n_neg < 0:
            raise ValueError("event counts must be >= 0")
        if self.sigma_pos < 0 or self.sigma_neg < 0:
            raise ValueError("standard deviations must be >= 0")
        bound = self.sigma_pos * self.sigma_neg
        if abs(self.cov) > bound + 1e-15 * max(bound, 1.0):
            raise InvalidCovariance(
                f"|cov| = {abs(self.cov)} exceeds sigma_pos*sigma_neg = {bound}")


def acc_moments(spec: AccumulationSpec):
    """Exact mean and variance of the accumulated log-radiance target."""
    mean = spec.n_pos * spec.c_pos - spec.n_neg * spec.c_neg
    var = (spec.n_pos ** 2 * spec.sigma_pos ** 2
           + spec.n_neg ** 2 * spec.sigma_neg ** 2
           - 2.0 * spec.n_pos * spec.n_neg * spec.cov)
    return float(mean), float(var)


def acc_monte_carlo(spec: AccumulationSpec, trials: int, seed: int = 0):
    """Empirical moments of the accumulated target over sampled thresholds.

    The bivariate threshold pair is built from shared normals so that
    perfect correlation cancels exactly, not just statistically.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    rng = np.random.default_rng(seed)
    z1 = rng.standard_normal(trials)
    z2 = rng.standard_normal(trials)
    c_pos = spec.c_pos + spec.sigma_pos * z1
    if spec.sigma_pos > 0 and spec.sigma_neg > 0:
        rho = spec.cov / (spec.sigma_pos * spec.sigma_neg)
        rho = float(np.clip(rho, -1.0, 1.0))
        mix = rho * z1 + np.sqrt(max(1.0 - rho * rho, 0.0)) * z2
    else:
        mix = z2
    c_neg = spec.c_neg + spec.sigma_neg * mix
    delta = spec.n_pos * c_pos - spec.n_neg * c_neg
    return float(np.mean(delta)), float(np.var(delta))


def normalized_targets(th: ThresholdParams):
    """Both thresholds normalized by their mean, their center and offset.

    The center is identically 1 for any valid threshold pair; the offset is
    the normalized threshold asymmetry, and each normalized threshold equals
    1 + p * offset.
    """
    pos = th.c_pos / th.mean
    neg = th.c_neg / th.mean
    center = 0.5 * (pos + neg)
    offset = th.half_diff / th.mean
    return pos, neg, center, offset
