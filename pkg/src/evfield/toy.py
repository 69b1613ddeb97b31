"""Procedural ground-truth scenes for synthetic pipelines.

The voxel scene is a handful of smooth density blobs with distinct colors
over a bright background; smooth fields keep the event simulator's adaptive
marching honest and give reconstructions something recoverable at desk
scale.
"""

from __future__ import annotations

import numpy as np

from .fields import TemporalSignalField, VoxelField, softplus_inv
from .sources import FourierSource


def toy_voxel_field(resolution=32, extent=1.0, channels=1, blobs=3, seed=0,
                    background=0.8, density_peak=40.0) -> VoxelField:
    """A few Gaussian density blobs with per-blob colors in a padded box."""
    rng = np.random.default_rng(seed)
    box = 1.1 * extent  # pad the content box so blobs never clip the boundary
    d = resolution
    axis = np.linspace(-box, box, d)
    gx, gy, gz = np.meshgrid(axis, axis, axis, indexing="ij")
    density = np.zeros((d, d, d))
    color = np.full((channels, d, d, d), 0.15)
    for _ in range(blobs):
        center = rng.uniform(-0.55 * extent, 0.55 * extent, size=3)
        radius = rng.uniform(0.18, 0.32) * extent
        blob = np.exp(-0.5 * ((gx - center[0]) ** 2 + (gy - center[1]) ** 2
                              + (gz - center[2]) ** 2) / radius ** 2)
        density += density_peak * blob
        shade = rng.uniform(0.3, 1.2, size=channels)
        color += shade[:, None, None, None] * blob
    density_raw = softplus_inv(np.maximum(density, 1e-6), beta=100.0)
    color_raw = softplus_inv(np.clip(color, 1e-3, None))
    bg_raw = np.full(channels, softplus_inv(background))
    return VoxelField(d, (-box, -box, -box), (box, box, box), channels,
                      density_raw=density_raw, color_raw=color_raw,
                      background_raw=bg_raw)


def toy_signal_field(width=4, height=4, harmonics=6, period=1.0, seed=0,
                     amplitude=1.2, base_freq=2) -> TemporalSignalField:
    """Per-pixel band-limited signals that swing a few thresholds per period.

    Harmonics below ``base_freq`` are zeroed so every pixel keeps moving,
    which keeps event coverage dense across the sequence.
    """
    src = FourierSource.random(width, height, harmonics, period, channels=1,
                               seed=seed, amplitude=amplitude, decay=1.0)
    field = src.fields[0]
    if base_freq > 1:
        field.coeffs[:, 1:base_freq] = 0.0
        field.coeffs[:, harmonics + 1:harmonics + base_freq] = 0.0
    return field
