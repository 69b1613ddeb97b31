"""Gradient-descent reconstruction with joint sensor-intrinsics recovery.

The field parameters, the positive-to-negative threshold ratio and the
refractory period are optimized together by Adam on the normalized event
losses.  Only the threshold *ratio* is learnable (the negative threshold
stays fixed: absolute scale is unobservable from events); the refractory
period is parameterised by a scaled sigmoid whose raw logit is projected
after every step so its slope never collapses at the extremes.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field as dc_field

import numpy as np

from ._rand import hash_u64
from .errors import BadMagic, DivergedLoss, FormatError, NoIntervals
from .events import EventStream, validate_stream
from .fields import make_scene, softplus, softplus_grad, softplus_inv
from .losses import (AccumulationBatch, EventBatch, LossWeights,
                     accumulate_windows, accumulated_loss, total_loss)
from .thresholds import ThresholdParams

CLAMP_EPS = 0.01  # refractory sigmoid output confined to [eps, 1 - eps]
_RAW_HI = float(np.log((1.0 - CLAMP_EPS) / CLAMP_EPS))
_RAW_LO = -_RAW_HI


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.clip(x, -60.0, 60.0)))


class LearnableIntrinsics:
    """Threshold ratio and refractory period in unconstrained coordinates.

    c_pos = c_neg * softplus(ratio_raw); tau = tau_max * s where s is the
    sigmoid of tau_raw clamped to [CLAMP_EPS, 1 - CLAMP_EPS].  Keeping
    tau_raw inside the matching logit interval bounds the sigmoid slope away
    from zero, which is what keeps the refractory period optimizable.
    """

    def __init__(self, c_neg: float, ratio_raw: float, tau_raw: float,
                 tau_max: float):
        if c_neg <= 0:
            raise ValueError("negative threshold must be positive")
        if tau_max < 0:
            raise ValueError("tau_max must be >= 0")
        self.c_neg = float(c_neg)
        self.ratio_raw = float(ratio_raw)
        self.tau_max = float(tau_max)
        self.tau_raw = float(np.clip(tau_raw, _RAW_LO, _RAW_HI))

    @classmethod
    def from_values(cls, thresholds: ThresholdParams, tau: float) -> "LearnableIntrinsics":
        """Intrinsics pinned at known values (raw coordinates chosen to match)."""
        if tau > 0:
            tau_max, tau_raw = 2.0 * tau, 0.0
        else:
            tau_max, tau_raw = 0.0, 0.0
        return cls(thresholds.c_neg, float(softplus_inv(thresholds.ratio)),
                   tau_raw, tau_max)

    @classmethod
    def for_learning(cls, c_neg: float, init_ratio: float,
                     tau_max: float) -> "LearnableIntrinsics":
        """Poor-initialisation setup: given ratio, tau at half its maximum."""
        return cls(c_neg, float(softplus_inv(init_ratio)), 0.0, tau_max)

    @property
    def ratio(self) -> float:
        return float(softplus(self.ratio_raw))

    @property
    def c_pos(self) -> float:
        return self.c_neg * self.ratio

    @property
    def thresholds(self) -> ThresholdParams:
        return ThresholdParams(self.c_neg, self.c_pos)

    @property
    def tau(self) -> float:
        if self.tau_max == 0.0:
            return 0.0
        s = float(np.clip(_sigmoid(self.tau_raw), CLAMP_EPS, 1.0 - CLAMP_EPS))
        return self.tau_max * s

    def dcpos_dratio_raw(self) -> float:
        return self.c_neg * float(softplus_grad(self.ratio_raw))

    def dtau_dtau_raw(self) -> float:
        s = _sigmoid(self.tau_raw)
        return self.tau_max * float(s * (1.0 - s))

    def project(self):
        """Pull the refractory logit back inside the clamp interval."""
        self.tau_raw = float(np.clip(self.tau_raw, _RAW_LO, _RAW_HI))


@dataclass
class TrainConfig:
    iterations: int = 4000
    lr: float = 0.01
    decay_factor: float = 0.33
    milestones: tuple = (0.5, 0.75, 0.9)
    threshold_lr_mult: float = 10.0
    refractory_rate_scale: float = 50.0  # desired tau-domain rate, in units of tau_max
    weight_decay: float = 1e-6
    batch_budget: int = 2 ** 16          # target ray samples per batch
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    weights: LossWeights = dc_field(default_factory=LossWeights)
    loss_mode: str = "normalized"        # or "accumulated" (baseline)
    accumulation_window: float = 1.0 / 24.0
    n_samples: int = 64
    h_rel: float = 1e-3
    c_neg: float = 0.25
    init_ratio: float = 1.0
    tau: float = 0.0                     # assumed refractory period when not learned

    def __post_init__(self):
        if self.lr <= 0 or self.iterations < 0:
            raise ValueError("need lr > 0 and iterations >= 0")
        if list(self.milestones) != sorted(self.milestones):
            raise ValueError("milestones must increase")
        if self.loss_mode not in ("normalized", "accumulated"):
            raise ValueError(f"unknown loss mode {self.loss_mode!r}")


@dataclass
class TrainState:
    field: object
    intrinsics: LearnableIntrinsics
    m: np.ndarray
    v: np.ndarray
    iteration: int
    trace: np.ndarray   # rows of (iteration, loss, ratio, tau)
    learn_threshold: bool = False
    learn_refractory: bool = False


def tau_max_from_stream(stream: EventStream) -> float:
    """Largest refractory period the stream admits: its smallest event pair gap."""
    intervals = stream.pair_intervals()
    if intervals.size == 0:
        raise NoIntervals("stream has no per-pixel consecutive event pair")
    return float(np.min(intervals))


def refractory_raw_lr(config: TrainConfig, intrinsics: LearnableIntrinsics) -> float:
    """Learning rate for the refractory logit: scale x tau_max.

    Adam steps have roughly the magnitude of the learning rate, so rating the
    raw logit at a multiple of the (small, in seconds) refractory range keeps
    steps a modest fraction of the sigmoid's useful span.  Mapping the rate
    through the sigmoid slope instead (~200 in raw units regardless of range)
    empirically slams tau against its clamp bounds and never settles.
    """
    return config.refractory_rate_scale * intrinsics.tau_max


def _lr_factor(config: TrainConfig, iteration: int) -> float:
    passed = sum(1 for frac in config.milestones
                 if iteration >= int(frac * config.iterations))
    return config.decay_factor ** passed


def fit(stream: EventStream, trajectory, field, config: TrainConfig,
        learn_threshold: bool = False, learn_refractory: bool = False,
        seed: int = 0, camera=None) -> TrainState:
    """Reconstruct a field (and optionally intrinsics) from an event stream.

    Batches are uniformly random without replacement within each epoch;
    batch size is set so the total ray-sample count per batch matches the
    configured budget.  Identical (seed, config, inputs) give identical
    final parameters.
    """
    report = validate_stream(stream)
    if not report.ok:
        raise ValueError(f"invalid event stream: {report.counts()}")

    if learn_refractory:
        tau_max = tau_max_from_stream(stream)
        intrinsics = LearnableIntrinsics.for_learning(
            config.c_neg, config.init_ratio, tau_max)
    else:
        intrinsics = LearnableIntrinsics.from_values(
            ThresholdParams.from_ratio(config.c_neg, config.init_ratio), config.tau)

    scene = make_scene(field, trajectory, camera, n_samples=config.n_samples)

    if config.loss_mode == "accumulated":
        if learn_threshold or learn_refractory:
            raise ValueError("the accumulation baseline does not support "
                             "joint intrinsics optimization")
        windows = accumulate_windows(stream, config.accumulation_window)
        n_items = len(windows)
        per_item = scene.samples_per_event  # two renders per window too
    else:
        windows = None
        n_items = len(stream)
        per_item = scene.samples_per_event
    batch_size = int(np.clip(round(config.batch_budget / per_item), 1, n_items))

    n_field = scene.n_params
    n_extra = int(learn_threshold) + int(learn_refractory)
    lr_vec = np.full(n_field + n_extra, config.lr)
    wd_vec = np.zeros(n_field + n_extra)
    wd_vec[:n_field] = config.weight_decay
    slot = n_field
    ratio_slot = tau_slot = None
    if learn_threshold:
        ratio_slot = slot
        lr_vec[slot] = config.lr * config.threshold_lr_mult
        slot += 1
    if learn_refractory:
        tau_slot = slot
        lr_vec[slot] = refractory_raw_lr(config, intrinsics)

    m = np.zeros(n_field + n_extra)
    v = np.zeros(n_field + n_extra)
    trace = np.empty((config.iterations, 4))

    epoch = -1
    cursor = n_items  # force a reshuffle on the first iteration
    order = None
    for it in range(config.iterations):
        if cursor + batch_size > n_items:
            epoch += 1
            rng = np.random.default_rng(int(hash_u64(seed, epoch, 11)))
            order = rng.permutation(n_items)
            cursor = 0
        take = order[cursor:cursor + batch_size]
        cursor += batch_size

        t_sam_seed = int(hash_u64(seed, epoch, 13))
        if config.loss_mode == "accumulated":
            res = accumulated_loss(windows.subset(take), scene,
                                   intrinsics.thresholds, weight=config.weights.diff)
        else:
            batch = EventBatch.from_stream(stream, take)
            res = total_loss(batch, scene, intrinsics, config.weights,
                             t_sam_seed, learn_threshold, learn_refractory,
                             h_rel=config.h_rel)
        if not np.isfinite(res.loss):
            raise DivergedLoss(f"loss became {res.loss} at iteration {it}")

        g = np.empty(n_field + n_extra)
        g[:n_field] = res.field_grad
        if ratio_slot is not None:
            g[ratio_slot] = res.ratio_raw_grad
        if tau_slot is not None:
            g[tau_slot] = res.tau_raw_grad
        params = np.empty_like(g)
        params[:n_field] = scene.get_params()
        if ratio_slot is not None:
            params[ratio_slot] = intrinsics.ratio_raw
        if tau_slot is not None:
            params[tau_slot] = intrinsics.tau_raw
        g += wd_vec * params

        m = config.beta1 * m + (1.0 - config.beta1) * g
        v = config.beta2 * v + (1.0 - config.beta2) * g * g
        t = it + 1
        m_hat = m / (1.0 - config.beta1 ** t)
        v_hat = v / (1.0 - config.beta2 ** t)
        params -= _lr_factor(config, it) * lr_vec * m_hat / (np.sqrt(v_hat) + config.adam_eps)

        scene.set_params(params[:n_field])
        if ratio_slot is not None:
            intrinsics.ratio_raw = float(params[ratio_slot])
        if tau_slot is not None:
            intrinsics.tau_raw = float(params[tau_slot])
            intrinsics.project()
        trace[it] = (it, res.loss, intrinsics.ratio, intrinsics.tau)

    return TrainState(field=field, intrinsics=intrinsics, m=m, v=v,
                      iteration=config.iterations, trace=trace,
                      learn_threshold=learn_threshold,
                      learn_refractory=learn_refractory)


# -- optimizer/intrinsics sidecar -------------------------------------------

SIDECAR_MAGIC = b"EVTS"


def save_train_state(path, state: TrainState):
    """Write the intrinsics/optimizer sidecar (little-endian binary)."""
    with open(path, "wb") as fh:
        fh.write(SIDECAR_MAGIC)
        flags = int(state.learn_threshold) | (int(state.learn_refractory) << 1)
        fh.write(struct.pack("<BB", 1, flags))
        fh.write(struct.pack("<4d", state.intrinsics.c_neg,
                             state.intrinsics.ratio_raw,
                             state.intrinsics.tau_raw,
                             state.intrinsics.tau_max))
        fh.write(struct.pack("<QQ", state.iteration, state.m.size))
        fh.write(state.m.astype("<f8").tobytes())
        fh.write(state.v.astype("<f8").tobytes())


def load_train_state(path):
    """Read a sidecar; returns (intrinsics, m, v, iteration, flags)."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != SIDECAR_MAGIC:
            raise BadMagic(f"expected {SIDECAR_MAGIC!r}, got {magic!r}")
        version, flags = struct.unpack("<BB", fh.read(2))
        if version != 1:
            raise FormatError(f"unsupported sidecar version {version}")
        c_neg, ratio_raw, tau_raw, tau_max = struct.unpack("<4d", fh.read(32))
        iteration, n = struct.unpack("<QQ", fh.read(16))
        m = np.frombuffer(fh.read(8 * n), dtype="<f8").copy()
        v = np.frombuffer(fh.read(8 * n), dtype="<f8").copy()
        intrinsics = LearnableIntrinsics(c_neg, ratio_raw, tau_raw, tau_max)
        return intrinsics, m, v, int(iteration), {
            "learn_threshold": bool(flags & 1),
            "learn_refractory": bool(flags & 2),
        }
