"""Gamma correction of synthesized views and image quality metrics.

Event-based reconstructions are accurate only up to a per-channel affine map
of the log-radiance (scale and offset are unobservable from changes alone).
Fitting that map against reference views by ordinary least squares and
exponentiating is exactly a per-channel gamma correction of the linear
radiance, after which PSNR/SSIM comparisons are meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import convolve1d

from .errors import RankDeficient, ShapeMismatch, TooSmall

SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_RANGE = 1.0


@dataclass(frozen=True)
class ViewPair:
    """A predicted and a reference linear-radiance image of the same view."""

    predicted: np.ndarray   # (H, W) or (H, W, C), strictly positive
    reference: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.predicted)
        r = np.asarray(self.reference)
        if p.shape != r.shape:
            raise ShapeMismatch(f"{p.shape} != {r.shape}")
        if np.any(p <= 0) or np.any(r <= 0):
            raise ValueError("radiance images must be strictly positive")

    @property
    def channels(self) -> int:
        p = np.asarray(self.predicted)
        return 1 if p.ndim == 2 else p.shape[2]


def _channel_stack(img, channels):
    a = np.asarray(img, dtype=np.float64)
    if a.ndim == 2:
        a = a[:, :, None]
    return a.reshape(-1, channels)


def gamma_correct(pairs):
    """Fit per-channel affine log corrections and apply them.

    Returns (a, b, corrected) where a and b are per-channel arrays solving
    min sum (a*log(pred) + b - log(ref))^2 in closed form, and ``corrected``
    holds exp(a*log(pred) + b) for every input pair.  Raises RankDeficient
    when a channel has no spread in predicted log values.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("need at least one view pair")
    channels = pairs[0].channels
    for pair in pairs:
        if pair.channels != channels:
            raise ShapeMismatch("view pairs disagree on channel count")
    x = np.concatenate([_channel_stack(np.log(np.asarray(p.predicted, dtype=np.float64)), channels)
                        for p in pairs])
    t = np.concatenate([_channel_stack(np.log(np.asarray(p.reference, dtype=np.float64)), channels)
                        for p in pairs])
    a = np.empty(channels)
    b = np.empty(channels)
    for c in range(channels):
        xc, tc = x[:, c], t[:, c]
        xm, tm = xc.mean(), tc.mean()
        sxx = np.sum((xc - xm) ** 2)
        if sxx <= 1e-18 * max(1.0, xm * xm) * len(xc):
            raise RankDeficient(f"channel {c} has no spread in predicted log values")
        a[c] = np.sum((xc - xm) * (tc - tm)) / sxx
        b[c] = tm - a[c] * xm
    corrected = []
    for pair in pairs:
        lp = np.log(np.asarray(pair.predicted, dtype=np.float64))
        if lp.ndim == 2:
            corrected.append(np.exp(a[0] * lp + b[0]))
        else:
            corrected.append(np.exp(lp * a + b))
    return a, b, corrected


def psnr(image, reference, peak: float) -> float:
    """Peak signal-to-noise ratio in dB; +inf for identical images."""
    image = np.asarray(image, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if image.shape != reference.shape:
        raise ShapeMismatch(f"{image.shape} != {reference.shape}")
    if peak <= 0:
        raise ValueError("peak must be positive")
    mse = float(np.mean((image - reference) ** 2))
    if mse == 0.0:
        return float("inf")
    return 10.0 * np.log10(peak * peak / mse)


def _gaussian_kernel(size, sigma):
    r = np.arange(size) - (size - 1) / 2.0
    k = np.exp(-0.5 * (r / sigma) ** 2)
    return k / k.sum()


def _ssim_single(img, ref):
    h, w = img.shape
    if h < SSIM_WINDOW or w < SSIM_WINDOW:
        raise TooSmall(f"image {img.shape} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")
    kernel = _gaussian_kernel(SSIM_WINDOW, SSIM_SIGMA)

    def smooth(a):
        out = convolve1d(a, kernel, axis=0, mode="constant")
        out = convolve1d(out, kernel, axis=1, mode="constant")
        half = SSIM_WINDOW // 2
        return out[half:h - half, half:w - half]

    mu1 = smooth(img)
    mu2 = smooth(ref)
    s11 = smooth(img * img) - mu1 * mu1
    s22 = smooth(ref * ref) - mu2 * mu2
    s12 = smooth(img * ref) - mu1 * mu2
    c1 = (SSIM_K1 * SSIM_RANGE) ** 2
    c2 = (SSIM_K2 * SSIM_RANGE) ** 2
    num = (2 * mu1 * mu2 + c1) * (2 * s12 + c2)
    den = (mu1 * mu1 + mu2 * mu2 + c1) * (s11 + s22 + c2)
    return float(np.mean(num / den))


def ssim(image, reference) -> float:
    """Mean local structural similarity over valid windows (range 1)."""
    image = np.asarray(image, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if image.shape != reference.shape:
        raise ShapeMismatch(f"{image.shape} != {reference.shape}")
    if image.ndim == 2:
        return _ssim_single(image, reference)
    return float(np.mean([_ssim_single(image[:, :, c], reference[:, :, c])
                          for c in range(image.shape[2])]))


# -- float map image files ---------------------------------------------------


def write_float_map(path, image):
    """Write an image as 'width height channels\\n' + little-endian float32."""
    a = np.asarray(image, dtype=np.float64)
    if a.ndim == 2:
        a = a[:, :, None]
    h, w, c = a.shape
    with open(path, "wb") as fh:
        fh.write(f"{w} {h} {c}\n".encode("ascii"))
        fh.write(a.astype("<f4").tobytes())


def read_float_map(path):
    """Read a float map; returns (H, W) for one channel, else (H, W, C)."""
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").split()
        if len(header) != 3:
            raise ValueError(f"bad float map header in {path}")
        w, h, c = (int(v) for v in header)
        data = np.frombuffer(fh.read(), dtype="<f4").astype(np.float64)
    if data.size != w * h * c:
        raise ValueError(f"float map {path} has {data.size} values, expected {w * h * c}")
    img = data.reshape(h, w, c)
    return img[:, :, 0] if c == 1 else img


def write_preview_pgm(path, image, lo=0.0, hi=1.0):
    """8-bit preview with a fixed display mapping; for visual inspection only."""
    a = np.asarray(image, dtype=np.float64)
    if a.ndim == 3:
        a = a.mean(axis=2)
    scaled = np.clip((a - lo) / (hi - lo), 0.0, 1.0)
    data = np.round(255.0 * scaled).astype(np.uint8)
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())
