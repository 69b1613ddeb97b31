"""Contrast threshold parameters and their per-pixel realisations.

Each pixel realises its own pair of thresholds, drawn once from a Gaussian
around the nominal per-polarity values; the draw is time-independent.
Realised thresholds are truncated below at 1% of the nominal value, since
non-positive thresholds are physically meaningless.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._rand import hash_normal

TRUNCATION_FLOOR = 0.01  # realised threshold >= floor * nominal


@dataclass(frozen=True)
class ThresholdParams:
    """Nominal per-polarity contrast thresholds in log-radiance units."""

    c_neg: float
    c_pos: float

    def __post_init__(self):
        if not (self.c_neg > 0 and self.c_pos > 0):
            raise ValueError("thresholds must be positive")

    @classmethod
    def symmetric(cls, c: float) -> "ThresholdParams":
        return cls(c, c)

    @classmethod
    def from_ratio(cls, c_neg: float, ratio: float) -> "ThresholdParams":
        return cls(c_neg, c_neg * ratio)

    @property
    def mean(self) -> float:
        """Mean threshold, the normaliser of the difference loss."""
        return 0.5 * (self.c_neg + self.c_pos)

    @property
    def half_diff(self) -> float:
        """Half the positive-minus-negative threshold difference."""
        return 0.5 * (self.c_pos - self.c_neg)

    @property
    def ratio(self) -> float:
        return self.c_pos / self.c_neg

    def of_polarity(self, p):
        """Threshold magnitude for polarity +1/-1 (vectorised)."""
        p = np.asarray(p)
        return np.where(p > 0, self.c_pos, self.c_neg)

    def scaled(self, k: float) -> "ThresholdParams":
        return ThresholdParams(self.c_neg * k, self.c_pos * k)


class ThresholdMap:
    """Per-pixel realised thresholds for both polarities.

    Values are drawn from Normal(nominal, sigma^2) truncated below at
    ``TRUNCATION_FLOOR * nominal`` by per-pixel rejection.  Every draw is a
    pure function of (seed, pixel index, polarity, attempt), so maps are
    reproducible independent of chunking or threads.
    """

    def __init__(self, width: int, height: int, params: ThresholdParams,
                 sigma: float, seed: int):
        if sigma < 0:
            raise ValueError("sigma must be >= 0")
        self.width = width
        self.height = height
        self.params = params
        self.sigma = float(sigma)
        self.seed = int(seed)
        n = width * height
        pix = np.arange(n, dtype=np.int64)
        self.c_neg = self._sample(params.c_neg, pix, polarity_key=0)
        self.c_pos = self._sample(params.c_pos, pix, polarity_key=1)

    def _sample(self, nominal: float, pix: np.ndarray, polarity_key: int) -> np.ndarray:
        if self.sigma == 0.0:
            return np.full(pix.shape, nominal, dtype=np.float64)
        floor = TRUNCATION_FLOOR * nominal
        out = np.empty(pix.shape, dtype=np.float64)
        pending = np.ones(pix.shape, dtype=bool)
        attempt = 0
        while np.any(pending):
            idx = np.flatnonzero(pending)
            z = hash_normal(self.seed, pix[idx], polarity_key, attempt)
            draw = nominal + self.sigma * z
            good = draw >= floor
            out[idx[good]] = draw[good]
            pending[idx[good]] = False
            attempt += 1
            if attempt > 10_000:  # sigma >> nominal would make rejection hopeless
                out[pending] = floor
                break
        return out

    def of_polarity(self, p) -> np.ndarray:
        p = np.asarray(p)
        return np.where(p > 0, self.c_pos, self.c_neg)

    def at(self, x, y, p) -> np.ndarray:
        """Realised threshold at pixel (x, y) for polarity p."""
        pix = np.asarray(y) * self.width + np.asarray(x)
        return np.where(np.asarray(p) > 0, self.c_pos[pix], self.c_neg[pix])
