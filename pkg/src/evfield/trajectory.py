"""Constant-rate camera trajectories: generation and interpolation.

Positions interpolate linearly, orientations by spherical linear
interpolation on unit quaternions (shortest arc, sign-corrected for the
double cover).  The built-in generator produces a hemispherical spiral
around the origin whose azimuth speed oscillates as base^sin(2*pi*f*t),
matching an object-capture rig with a non-uniform speed profile.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParams, OutOfRange

MAX_ELEVATION_DEG = 89.0  # keep the look-at frame away from the pole singularity


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics; x right, y down, z forward (OpenCV convention)."""

    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")

    @classmethod
    def from_fov(cls, width: int, height: int, fov_x_deg: float) -> "CameraIntrinsics":
        f = 0.5 * width / np.tan(0.5 * np.deg2rad(fov_x_deg))
        return cls(f, f, 0.5 * width, 0.5 * height)

    def ray_directions_cam(self, px, py):
        """Unit directions through pixel centers, in the camera frame."""
        px = np.asarray(px, dtype=np.float64)
        py = np.asarray(py, dtype=np.float64)
        d = np.stack([
            (px + 0.5 - self.cx) / self.fx,
            (py + 0.5 - self.cy) / self.fy,
            np.ones_like(px, dtype=np.float64),
        ], axis=-1)
        return d / np.linalg.norm(d, axis=-1, keepdims=True)


@dataclass(frozen=True)
class PoseSample:
    """Camera pose at one instant: position and camera-to-world quaternion (w,x,y,z)."""

    t: float
    position: np.ndarray
    orientation: np.ndarray

    def rotation(self) -> np.ndarray:
        return quat_to_matrix(self.orientation)


def quat_normalize(q):
    q = np.asarray(q, dtype=np.float64)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def quat_to_matrix(q) -> np.ndarray:
    """Rotation matrices from unit quaternions (w, x, y, z); supports batches."""
    q = np.asarray(q, dtype=np.float64)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    m = np.empty(q.shape[:-1] + (3, 3), dtype=np.float64)
    m[..., 0, 0] = 1 - 2 * (y * y + z * z)
    m[..., 0, 1] = 2 * (x * y - w * z)
    m[..., 0, 2] = 2 * (x * z + w * y)
    m[..., 1, 0] = 2 * (x * y + w * z)
    m[..., 1, 1] = 1 - 2 * (x * x + z * z)
    m[..., 1, 2] = 2 * (y * z - w * x)
    m[..., 2, 0] = 2 * (x * z - w * y)
    m[..., 2, 1] = 2 * (y * z + w * x)
    m[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return m


def matrix_to_quat(m) -> np.ndarray:
    """Unit quaternion (w, x, y, z) from a rotation matrix; supports batches."""
    m = np.asarray(m, dtype=np.float64)
    batch = m.shape[:-2]
    m = m.reshape((-1, 3, 3))
    q = np.empty((m.shape[0], 4), dtype=np.float64)
    tr = m[:, 0, 0] + m[:, 1, 1] + m[:, 2, 2]
    for i in range(m.shape[0]):
        r = m[i]
        if tr[i] > 0:
            s = np.sqrt(tr[i] + 1.0) * 2
            q[i] = [0.25 * s, (r[2, 1] - r[1, 2]) / s,
                    (r[0, 2] - r[2, 0]) / s, (r[1, 0] - r[0, 1]) / s]
        elif r[0, 0] >= r[1, 1] and r[0, 0] >= r[2, 2]:
            s = np.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2]) * 2
            q[i] = [(r[2, 1] - r[1, 2]) / s, 0.25 * s,
                    (r[0, 1] + r[1, 0]) / s, (r[0, 2] + r[2, 0]) / s]
        elif r[1, 1] >= r[2, 2]:
            s = np.sqrt(1.0 + r[1, 1] - r[0, 0] - r[2, 2]) * 2
            q[i] = [(r[0, 2] - r[2, 0]) / s, (r[0, 1] + r[1, 0]) / s,
                    0.25 * s, (r[1, 2] + r[2, 1]) / s]
        else:
            s = np.sqrt(1.0 + r[2, 2] - r[0, 0] - r[1, 1]) * 2
            q[i] = [(r[1, 0] - r[0, 1]) / s, (r[0, 2] + r[2, 0]) / s,
                    (r[1, 2] + r[2, 1]) / s, 0.25 * s]
    return quat_normalize(q).reshape(batch + (4,))


def slerp(q0, q1, u):
    """Spherical linear interpolation with shortest-arc sign correction.

    Vectorised over leading axes; u in [0, 1].
    """
    q0 = np.asarray(q0, dtype=np.float64)
    q1 = np.asarray(q1, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)[..., None]
    dot = np.sum(q0 * q1, axis=-1, keepdims=True)
    q1 = np.where(dot < 0, -q1, q1)
    dot = np.abs(dot)
    dot = np.clip(dot, -1.0, 1.0)
    theta = np.arccos(dot)
    sin_theta = np.sin(theta)
    near = sin_theta < 1e-9
    with np.errstate(divide="ignore", invalid="ignore"):
        w0 = np.where(near, 1.0 - u, np.sin((1.0 - u) * theta) / sin_theta)
        w1 = np.where(near, u, np.sin(u * theta) / sin_theta)
    return quat_normalize(w0 * q0 + w1 * q1)


def look_at_quat(position, target, up=(0.0, 0.0, 1.0)) -> np.ndarray:
    """Camera-to-world quaternion looking from position toward target.

    Camera z points at the target and camera y points "down" so the world up
    vector maps near the image top.  Vectorised over leading axes.
    """
    position = np.asarray(position, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    up = np.asarray(up, dtype=np.float64)
    fwd = target - position
    fwd = fwd / np.linalg.norm(fwd, axis=-1, keepdims=True)
    right = np.cross(fwd, np.broadcast_to(up, fwd.shape))
    nr = np.linalg.norm(right, axis=-1, keepdims=True)
    if np.any(nr < 1e-12):
        raise InvalidParams("view direction parallel to the up vector")
    right = right / nr
    down = np.cross(fwd, right)
    rot = np.stack([right, down, fwd], axis=-1)  # columns: x_cam, y_cam, z_cam
    return matrix_to_quat(rot)


class Trajectory:
    """Uniformly sampled camera poses with constant spacing 1/rate."""

    def __init__(self, times, positions, orientations, rate: float):
        self.times = np.asarray(times, dtype=np.float64)
        self.positions = np.asarray(positions, dtype=np.float64)
        self.orientations = quat_normalize(orientations)
        self.rate = float(rate)
        if len(self.times) < 2:
            raise InvalidParams("trajectory needs at least two samples")
        dt = np.diff(self.times)
        if np.any(dt <= 0) or np.ptp(dt) > 1e-9 / self.rate + 1e-12:
            raise InvalidParams("sample times must increase with constant spacing")
        # enforce quaternion continuity so interpolation never crosses the cover
        q = self.orientations
        flip = np.cumsum(np.concatenate([[0.0], (np.sum(q[1:] * q[:-1], axis=1) < 0)])) % 2
        self.orientations = q * np.where(flip[:, None] > 0, -1.0, 1.0)

    def __len__(self):
        return len(self.times)

    @property
    def t_first(self) -> float:
        return float(self.times[0])

    @property
    def t_last(self) -> float:
        return float(self.times[-1])

    def sample(self, i: int) -> PoseSample:
        return PoseSample(float(self.times[i]), self.positions[i].copy(),
                          self.orientations[i].copy())

    def interpolate(self, t):
        """Positions and orientations at times t (vectorised).

        Returns (positions (..., 3), quaternions (..., 4)).
        """
        t = np.asarray(t, dtype=np.float64)
        if np.any(t < self.t_first) or np.any(t > self.t_last):
            raise OutOfRange(
                f"time outside [{self.t_first}, {self.t_last}]")
        hi = np.searchsorted(self.times, t, side="right")
        hi = np.clip(hi, 1, len(self.times) - 1)
        lo = hi - 1
        dt = self.times[hi] - self.times[lo]
        u = (t - self.times[lo]) / dt
        pos = self.positions[lo] + (self.positions[hi] - self.positions[lo]) * u[..., None]
        quat = slerp(self.orientations[lo], self.orientations[hi], u)
        return pos, quat


def interpolate_pose(traj: Trajectory, t: float) -> PoseSample:
    """Pose at time t: LERP position, SLERP orientation; exact at samples."""
    pos, quat = traj.interpolate(np.asarray(t, dtype=np.float64))
    return PoseSample(float(t), pos, quat)


def generate_spiral(radius: float, height_span: float, revolutions: float,
                    v_b: float, f: float, duration: float, rate: float,
                    oversample: int = 10) -> Trajectory:
    """Hemispherical look-at spiral with oscillating azimuth speed.

    The azimuth rate is omega0 * v_b**sin(2*pi*f*t); omega0 is normalised by
    trapezoidal integration (on a grid >= ``oversample`` x rate) so the total
    azimuth equals revolutions * 2*pi over the duration.  The camera descends
    linearly in height with azimuth, from ``height_span`` above the equator
    plane toward it, always looking at the origin.
    """
    if radius <= 0 or duration <= 0 or revolutions <= 0:
        raise InvalidParams("radius, duration and revolutions must be positive")
    if v_b < 1:
        raise InvalidParams("speed oscillation base must be >= 1")
    if v_b > 1 and f > 0 and rate < 20 * f:
        raise InvalidParams("pose rate too low for the speed oscillation frequency")
    if height_span < 0 or height_span > radius:
        raise InvalidParams("height span must lie in [0, radius]")

    n_steps = int(np.ceil(duration * rate - 1e-9))
    while n_steps / rate < duration:  # last sample must reach the full duration
        n_steps += 1
    times = np.arange(n_steps + 1, dtype=np.float64) / rate
    grid = np.linspace(0.0, duration, max(2, int(np.ceil(duration * rate * oversample)) + 1))
    speed = np.power(v_b, np.sin(2.0 * np.pi * f * grid))
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (speed[1:] + speed[:-1]) * np.diff(grid))])
    omega0 = revolutions * 2.0 * np.pi / cum[-1]
    theta = omega0 * np.interp(times, grid, cum)
    theta_total = revolutions * 2.0 * np.pi

    z_cap = radius * np.sin(np.deg2rad(MAX_ELEVATION_DEG))
    z_top = min(height_span, z_cap)
    z = z_top * (1.0 - theta / theta_total)
    rho = np.sqrt(np.maximum(radius * radius - z * z, 0.0))
    positions = np.stack([rho * np.cos(theta), rho * np.sin(theta), z], axis=1)
    orientations = look_at_quat(positions, np.zeros(3))
    return Trajectory(times, positions, orientations, rate)
