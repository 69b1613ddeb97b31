"""Continuous log-radiance sources the simulator can observe.

A radiance source is anything with a ``channels`` attribute and a
vectorised ``log_radiance(x, y, t, channel) -> array`` method that is
continuous and piecewise-smooth in t and finite for every queried input.
Pixel coordinates, times and channel indices arrive as equal-length arrays.
"""

from __future__ import annotations

import numpy as np

from .fields import TemporalSignalField, VoxelScene


class ConstantSource:
    """Spatially and temporally constant log-radiance."""

    def __init__(self, value=0.0, channels=1):
        self.value = float(value)
        self.channels = channels

    def log_radiance(self, x, y, t, channel):
        return np.full(np.shape(t), self.value, dtype=np.float64)


class RampSource:
    """log L = offset + slope * t at every pixel; the classic analytic probe."""

    def __init__(self, slope=1.0, offset=0.0, channels=1):
        self.slope = float(slope)
        self.offset = float(offset)
        self.channels = channels

    def log_radiance(self, x, y, t, channel):
        return self.offset + self.slope * np.asarray(t, dtype=np.float64)


class FourierSource:
    """Per-pixel, per-channel truncated Fourier log-radiance.

    Backed by one TemporalSignalField per channel, so the same coefficients
    can later serve as the ground truth a reconstruction is compared to.
    """

    def __init__(self, fields):
        fields = list(fields)
        if not fields:
            raise ValueError("need at least one channel field")
        self.fields = fields
        self.channels = len(fields)

    @classmethod
    def random(cls, width, height, harmonics, period, channels=1, seed=0,
               amplitude=1.0, decay=1.5, offset=0.0):
        """Random smooth signals; harmonic k is damped by k**-decay."""
        rng = np.random.default_rng(seed)
        fields = []
        k = np.arange(1, harmonics + 1, dtype=np.float64)
        scale = amplitude * k ** (-decay)
        for _ in range(channels):
            coeffs = np.zeros((width * height, 2 * harmonics + 1))
            coeffs[:, 0] = offset + 0.1 * rng.standard_normal(width * height)
            coeffs[:, 1:harmonics + 1] = scale * rng.standard_normal((width * height, harmonics))
            coeffs[:, harmonics + 1:] = scale * rng.standard_normal((width * height, harmonics))
            fields.append(TemporalSignalField(width, height, harmonics, period, coeffs))
        return cls(fields)

    def log_radiance(self, x, y, t, channel):
        channel = np.asarray(channel, dtype=np.int64)
        x = np.asarray(x, dtype=np.int64)
        y = np.asarray(y, dtype=np.int64)
        t = np.asarray(t, dtype=np.float64)
        if self.channels == 1:
            return self.fields[0].log_radiance(x, y, t)
        out = np.empty(t.shape, dtype=np.float64)
        for c, field in enumerate(self.fields):
            m = channel == c
            if np.any(m):
                out[m] = field.log_radiance(x[m], y[m], t[m])
        return out


class SignalSource:
    """Adapter exposing a single TemporalSignalField as a mono source."""

    channels = 1

    def __init__(self, field: TemporalSignalField):
        self.field = field

    def log_radiance(self, x, y, t, channel):
        return self.field.log_radiance(x, y, t)


class FieldSource:
    """A voxel field observed through a moving camera as a radiance source.

    Every query renders the back-projected ray of the pixel at the requested
    time, which makes this the ground-truth generator for the end-to-end
    synthetic pipeline.
    """

    def __init__(self, scene: VoxelScene):
        self.scene = scene
        self.channels = scene.field.channels

    def log_radiance(self, x, y, t, channel):
        return self.scene.log_value(np.asarray(x), np.asarray(y),
                                    np.asarray(channel), np.asarray(t))
