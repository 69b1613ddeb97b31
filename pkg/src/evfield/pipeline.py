"""End-to-end synthetic pipelines assembled from a run configuration.

simulate: scene source + spiral trajectory -> event stream (+ pose file)
reconstruct: event stream -> trained field (+ intrinsics)
evaluate: field + poses + reference views -> gamma-corrected PSNR / SSIM
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .errors import ConfigError
from .events import SensorGeometry
from .fields import (DEFAULT_N_SAMPLES, PoseLike, TemporalSignalField,
                     VoxelField, VoxelScene, default_span, make_scene)
from .losses import LossWeights
from .metrics import ViewPair, gamma_correct, psnr, ssim
from .simulator import simulate, simulate_bayer
from .sources import FieldSource, FourierSource, RampSource
from .thresholds import ThresholdParams
from .toy import toy_voxel_field
from .trajectory import (CameraIntrinsics, Trajectory, generate_spiral,
                         quat_to_matrix)
from .trainer import TrainConfig, fit


def build_trajectory(cfg: RunConfig) -> Trajectory:
    t = cfg["trajectory"]
    return generate_spiral(t["radius"], t["height_span"], t["revolutions"],
                           t["v_b"], t["f"], t["duration"], t["rate"])


def build_camera(cfg: RunConfig) -> CameraIntrinsics:
    s = cfg["sensor"]
    return CameraIntrinsics.from_fov(s["width"], s["height"],
                                     cfg["camera"]["fov_x_deg"])


def build_geometry(cfg: RunConfig) -> SensorGeometry:
    s = cfg["sensor"]
    return SensorGeometry(s["width"], s["height"], s["color_filter"])


def sensor_thresholds(cfg: RunConfig) -> ThresholdParams:
    s = cfg["sensor"]
    if s["c_pos"] is not None:
        return ThresholdParams(s["c_neg"], s["c_pos"])
    return ThresholdParams.from_ratio(s["c_neg"], s["ratio"])


def build_source(cfg: RunConfig, trajectory: Trajectory,
                 camera: CameraIntrinsics):
    """Radiance source named by [scene]; returns (source, ground_truth_field)."""
    scene = cfg["scene"]
    geometry = build_geometry(cfg)
    kind = scene["kind"]
    if kind == "ramp":
        return RampSource(scene["slope"], scene["offset"],
                          channels=geometry.channels), None
    if kind == "fourier":
        src = FourierSource.random(
            geometry.width, geometry.height, scene["harmonics"],
            cfg["trajectory"]["duration"], channels=geometry.channels,
            seed=scene["source_seed"], amplitude=scene["amplitude"],
            decay=scene["decay"], offset=scene["offset"])
        return src, src.fields[0] if geometry.channels == 1 else None
    if kind == "voxel_blobs":
        gt = toy_voxel_field(scene["resolution"], scene["extent"],
                             geometry.channels, scene["blobs"],
                             scene["source_seed"], scene["background"])
        view = VoxelScene(gt, trajectory, camera)
        return FieldSource(view), gt
    raise ConfigError(f"unknown scene kind {kind!r}")


def run_simulate(cfg: RunConfig):
    """Simulate the configured scene; returns (stream, trajectory, source, gt)."""
    trajectory = build_trajectory(cfg)
    camera = build_camera(cfg)
    geometry = build_geometry(cfg)
    source, gt = build_source(cfg, trajectory, camera)
    s = cfg["sensor"]
    sim = cfg["simulate"]
    t0 = sim["t0"]
    t1 = t0 + cfg["trajectory"]["duration"]
    runner = simulate_bayer if geometry.color_filter == "rggb" else simulate
    stream = runner(source, geometry, sensor_thresholds(cfg), s["sigma"],
                    s["refractory"], t0, t1, s["seed"], workers=sim["workers"])
    return stream, trajectory, source, gt


def train_config(cfg: RunConfig) -> TrainConfig:
    t = cfg["train"]
    s = cfg["sensor"]
    init_ratio = t["init_ratio"]
    if init_ratio is None:
        init_ratio = sensor_thresholds(cfg).ratio
    tau = t["tau"]
    if tau is None:
        tau = s["refractory"]
    return TrainConfig(
        iterations=t["iterations"], lr=t["lr"], batch_budget=t["batch_budget"],
        weights=LossWeights(t["lambda_diff"], t["lambda_grad"]),
        weight_decay=t["weight_decay"], loss_mode=t["loss_mode"],
        accumulation_window=t["accumulation_window"], n_samples=t["n_samples"],
        c_neg=s["c_neg"], init_ratio=init_ratio, tau=tau)


def build_recon_field(cfg: RunConfig):
    t = cfg["train"]
    geometry = build_geometry(cfg)
    if t["field"] == "signal":
        return TemporalSignalField(geometry.width, geometry.height,
                                   t["harmonics"], cfg["trajectory"]["duration"])
    if t["field"] == "voxel":
        extent = 1.1 * cfg["scene"]["extent"]
        return VoxelField.initialized(t["resolution"],
                                      (-extent, -extent, -extent),
                                      (extent, extent, extent),
                                      geometry.channels, seed=t["seed"])
    raise ConfigError(f"unknown reconstruction field {t['field']!r}")


def run_reconstruct(cfg: RunConfig, stream, trajectory):
    tcfg = train_config(cfg)
    field = build_recon_field(cfg)
    t = cfg["train"]
    camera = build_camera(cfg)
    state = fit(stream, trajectory, field, tcfg,
                learn_threshold=t["learn_threshold"],
                learn_refractory=t["learn_refractory"],
                seed=t["seed"], camera=camera)
    return state


# -- view rendering and evaluation -------------------------------------------


def render_view(field: VoxelField, pose, camera: CameraIntrinsics,
                width: int, height: int, n_samples=DEFAULT_N_SAMPLES,
                s_near=None, s_far=None, chunk=8192):
    """Render a full linear-radiance image at one pose; (H, W) or (H, W, C)."""
    if s_near is None or s_far is None:
        s_near, s_far = default_span(field, pose.position)
    xs, ys = np.meshgrid(np.arange(width), np.arange(height))
    d_cam = camera.ray_directions_cam(xs.ravel(), ys.ravel())
    d_world = d_cam @ quat_to_matrix(pose.orientation).T
    origins = np.broadcast_to(np.asarray(pose.position, dtype=np.float64),
                              d_world.shape)
    out = np.empty((d_world.shape[0], field.channels))
    for lo in range(0, d_world.shape[0], chunk):
        hi = lo + chunk
        out[lo:hi] = field.render(origins[lo:hi], d_world[lo:hi],
                                  s_near, s_far, n_samples)
    img = out.reshape(height, width, field.channels)
    return img[:, :, 0] if field.channels == 1 else img


@dataclass
class ViewMetrics:
    psnr: float
    ssim: float


def evaluate_views(pred_images, ref_images):
    """Gamma-correct predictions against references and score them.

    Returns (per-view ViewMetrics list, mean ViewMetrics, (a, b)).  The fit
    uses all views jointly; PSNR peak is the maximum reference value, and
    images are scaled by it before SSIM so the unit dynamic range applies.
    """
    pairs = [ViewPair(np.asarray(p, dtype=np.float64),
                      np.asarray(r, dtype=np.float64))
             for p, r in zip(pred_images, ref_images)]
    a, b, corrected = gamma_correct(pairs)
    peak = max(float(np.max(np.asarray(r))) for r in ref_images)
    rows = []
    for corr, ref in zip(corrected, ref_images):
        ref = np.asarray(ref, dtype=np.float64)
        rows.append(ViewMetrics(psnr(corr, ref, peak),
                                ssim(corr / peak, ref / peak)))
    mean = ViewMetrics(float(np.mean([r.psnr for r in rows])),
                       float(np.mean([r.ssim for r in rows])))
    return rows, mean, (a, b)


def eval_poses(trajectory: Trajectory, count: int):
    """Held-out novel views: poses at times between trajectory samples."""
    ts = np.linspace(trajectory.t_first, trajectory.t_last, count + 2)[1:-1]
    poses = []
    for t in ts:
        pos, quat = trajectory.interpolate(np.asarray(t))
        poses.append(PoseLike(float(t), pos, quat))
    return poses
