"""Event camera simulation and event-based radiance field reconstruction."""

from .accumulation import AccumulationSpec, acc_moments, acc_monte_carlo, normalized_targets
from .events import (Event, EventStream, SensorGeometry, StreamStats,
                     derive_t_ref, stream_stats, validate_stream)
from .fields import (Ray, TemporalSignalField, VoxelField, load_field,
                     make_scene, param_gradient, render_log_radiance,
                     render_radiance, save_field, temporal_log_gradient)
from .losses import (EventBatch, LossWeights, loss_accumulated, loss_diff,
                     loss_grad, sample_t_sam, total_loss)
from .metrics import ViewPair, gamma_correct, psnr, read_float_map, ssim, write_float_map
from .simulator import simulate, simulate_bayer
from .thresholds import ThresholdMap, ThresholdParams
from .trainer import (LearnableIntrinsics, TrainConfig, TrainState, fit,
                      tau_max_from_stream)
from .trajectory import (CameraIntrinsics, PoseSample, Trajectory,
                         generate_spiral, interpolate_pose)

__version__ = "0.1.0"

__all__ = [
    "AccumulationSpec", "acc_moments", "acc_monte_carlo", "normalized_targets",
    "Event", "EventStream", "SensorGeometry", "StreamStats",
    "derive_t_ref", "stream_stats", "validate_stream",
    "Ray", "TemporalSignalField", "VoxelField", "load_field", "make_scene",
    "param_gradient", "render_log_radiance", "render_radiance", "save_field",
    "temporal_log_gradient",
    "EventBatch", "LossWeights", "loss_accumulated", "loss_diff", "loss_grad",
    "sample_t_sam", "total_loss",
    "ViewPair", "gamma_correct", "psnr", "read_float_map", "ssim", "write_float_map",
    "simulate", "simulate_bayer",
    "ThresholdMap", "ThresholdParams",
    "LearnableIntrinsics", "TrainConfig", "TrainState", "fit", "tau_max_from_stream",
    "CameraIntrinsics", "PoseSample", "Trajectory", "generate_spiral",
    "interpolate_pose",
]
