"""Normalized reconstruction losses, the supervision-time sampler and the
accumulation baseline.

The primary loss scores the squared mismatch between the predicted and
observed log-radiance difference of an event, normalized by the mean
contrast threshold; the companion loss is the absolute percentage error of
the predicted temporal log-radiance gradient against the per-event finite
difference target.  Both are invariant to the common scale of thresholds
and predicted log-radiance, and the gradient loss is additionally invariant
to the speed of motion, which is what lets a single weight pair generalize
across capture conditions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._rand import hash_normal
from .errors import EmptyBatch, EmptyInterval
from .events import EventStream, reference_times
from .fields import DEFAULT_H_REL
from .thresholds import ThresholdParams


@dataclass(frozen=True)
class LossWeights:
    diff: float = 1.0
    grad: float = 1e-3

    def __post_init__(self):
        if self.diff < 0 or self.grad < 0:
            raise ValueError("loss weights must be nonnegative")


def loss_diff(delta_log_pred, p, th: ThresholdParams):
    """Threshold-normalized squared difference consistency (vectorised)."""
    r = (np.asarray(delta_log_pred, dtype=np.float64)
         - np.asarray(p) * th.of_polarity(p)) / th.mean
    return r * r


def loss_grad(pred_gradient, p, th: ThresholdParams, t_ref, t_curr):
    """Absolute percentage error against the per-event gradient target.

    The target p * C_p / (t_curr - t_ref) is never zero, so the only guard
    needed is a positive interval.
    """
    t_ref = np.asarray(t_ref, dtype=np.float64)
    t_curr = np.asarray(t_curr, dtype=np.float64)
    if np.any(t_curr <= t_ref):
        raise EmptyInterval("need t_curr > t_ref")
    target = np.asarray(p) * th.of_polarity(p) / (t_curr - t_ref)
    return np.abs(np.asarray(pred_gradient, dtype=np.float64) - target) / np.abs(target)


def loss_accumulated(polarities, delta_log_pred, th: ThresholdParams):
    """Baseline loss on events accumulated over a window at one pixel.

    The target is the sum of signed nominal thresholds of the window's
    events; an empty window targets zero change.
    """
    polarities = np.asarray(polarities, dtype=np.float64)
    n_pos = float(np.sum(polarities > 0))
    n_neg = float(np.sum(polarities < 0))
    target = n_pos * th.c_pos - n_neg * th.c_neg
    r = (float(delta_log_pred) - target) / th.mean
    return r * r


def sample_t_sam(t_ref: float, t_curr: float, rng: np.random.Generator,
                 size=None):
    """Draw supervision timestamps inside (t_ref, t_curr).

    Samples come from a normal centered at the midpoint with standard
    deviation a quarter of the interval, truncated to the open interval by
    rejection (acceptance ~0.95, so about 1.05 draws per sample).
    """
    if not t_curr > t_ref:
        raise EmptyInterval("need t_curr > t_ref")
    scalar = size is None
    n = 1 if scalar else int(size)
    mid = 0.5 * (t_ref + t_curr)
    sd = 0.25 * (t_curr - t_ref)
    out = np.empty(n, dtype=np.float64)
    pending = np.ones(n, dtype=bool)
    while np.any(pending):
        k = int(np.sum(pending))
        draw = rng.normal(mid, sd, size=k)
        good = (draw > t_ref) & (draw < t_curr)
        idx = np.flatnonzero(pending)[good]
        out[idx] = draw[good]
        pending[idx] = False
    return float(out[0]) if scalar else out


def t_sam_units(seed: int, index) -> np.ndarray:
    """Frozen normalized supervision offsets in (0, 1), one per event index.

    Pure function of (seed, event index): truncated Normal(0.5, 0.25^2) via
    counter-hash rejection, so losses are reproducible no matter how the
    stream is batched.
    """
    index = np.asarray(index, dtype=np.int64)
    out = np.empty(index.shape, dtype=np.float64)
    pending = np.ones(index.shape, dtype=bool)
    attempt = 0
    while np.any(pending):
        idx = np.flatnonzero(pending)
        z = hash_normal(seed, index.ravel()[idx], 2, attempt)
        good = np.abs(z) < 2.0
        out.ravel()[idx[good]] = 0.5 + 0.25 * z[good]
        pending.ravel()[idx[good]] = False
        attempt += 1
    return out


@dataclass
class EventBatch:
    """A view over a subset of a stream, with global event indices."""

    x: np.ndarray
    y: np.ndarray
    p: np.ndarray
    t_prev: np.ndarray
    t_curr: np.ndarray
    channel: np.ndarray
    index: np.ndarray
    t_start: float

    @classmethod
    def from_stream(cls, stream: EventStream, indices=None) -> "EventBatch":
        if indices is None:
            indices = np.arange(len(stream))
        indices = np.asarray(indices, dtype=np.int64)
        ch = stream.channel()
        return cls(stream.x[indices], stream.y[indices], stream.p[indices],
                   stream.t_prev[indices], stream.t_curr[indices],
                   ch[indices], indices, stream.t_start)

    def __len__(self):
        return len(self.x)


@dataclass
class TotalLossResult:
    loss: float
    field_grad: np.ndarray
    diff_term: float
    grad_term: float
    ratio_raw_grad: float | None = None
    tau_raw_grad: float | None = None
    n_events: int = 0


def total_loss(batch: EventBatch, scene, intrinsics, weights: LossWeights,
               t_sam_seed: int, learn_threshold: bool = False,
               learn_refractory: bool = False,
               h_rel: float = DEFAULT_H_REL) -> TotalLossResult:
    """Mean weighted loss over an event batch, with parameter gradients.

    ``scene`` is a SignalScene/VoxelScene; ``intrinsics`` carries the
    threshold and refractory model (see trainer.LearnableIntrinsics).  The
    supervision timestamp of each event is a frozen function of
    (t_sam_seed, global event index), reparameterised as a normalized offset
    so the loss stays smooth in the refractory parameter.

    Returns the scalar loss, the flat field-parameter gradient and, when the
    corresponding intrinsic is learnable, the gradients of the raw
    threshold-ratio and refractory parameters.
    """
    n = len(batch)
    if n == 0:
        raise EmptyBatch("cannot reduce an empty event batch")
    th = intrinsics.thresholds
    tau = intrinsics.tau
    c_bar = th.mean
    c_p = th.of_polarity(batch.p)
    p = batch.p.astype(np.float64)
    pos_mask = (p > 0).astype(np.float64)

    t_ref = reference_times(batch.t_prev, batch.t_curr, tau, batch.t_start)
    first = batch.t_prev == batch.t_start
    interval = batch.t_curr - t_ref
    h = h_rel * (batch.t_curr - batch.t_prev)  # FD step; kept independent of tau

    grad = np.zeros(scene.n_params)
    ratio_grad = 0.0 if learn_threshold else None
    tau_grad = 0.0 if learn_refractory else None
    x, y, ch = batch.x, batch.y, batch.channel

    # -- difference term ----------------------------------------------------
    diff_term = 0.0
    if weights.diff > 0:
        f_curr, bp_curr = scene.log_value_eval(x, y, ch, batch.t_curr)
        f_ref, bp_ref = scene.log_value_eval(x, y, ch, t_ref)
        delta = f_curr - f_ref
        r = (delta - p * c_p) / c_bar
        diff_term = float(np.mean(r * r))
        coeff = (weights.diff / n) * 2.0 * r / c_bar
        bp_curr(coeff, grad)
        bp_ref(-coeff, grad)
        if learn_threshold:
            dr_dcpos = (-p * pos_mask * c_bar - (delta - p * c_p) * 0.5) / c_bar ** 2
            ratio_grad += float(np.sum((weights.diff / n) * 2.0 * r * dr_dcpos))
        if learn_refractory:
            # the reference render moves with tau (except for first events)
            f_ref_dot = scene.time_slope(x, y, ch, t_ref, h)
            tau_grad += float(np.sum(np.where(first, 0.0, -coeff * f_ref_dot)))

    # -- gradient term --------------------------------------------------------
    grad_term = 0.0
    if weights.grad > 0:
        u = t_sam_units(t_sam_seed, batch.index)
        t_sam = t_ref + u * interval
        pred, bp_pred = scene.time_grad_eval(x, y, ch, t_sam, h)
        target = p * c_p / interval
        resid = pred - target
        sgn = np.sign(resid)
        grad_term = float(np.mean(np.abs(resid) / np.abs(target)))
        d_pred = sgn / np.abs(target)
        bp_pred((weights.grad / n) * d_pred, grad)
        d_target = -sgn / np.abs(target) - np.abs(resid) * p / target ** 2
        if learn_threshold:
            dtarget_dcpos = p * pos_mask / interval
            ratio_grad += float(np.sum((weights.grad / n) * d_target * dtarget_dcpos))
        if learn_refractory:
            dtarget_dtau = target / interval
            pred_dot = scene.time_grad_tangent(x, y, ch, t_sam, h)
            dpred_dtau = pred_dot * (1.0 - u)
            contrib = d_pred * dpred_dtau + d_target * dtarget_dtau
            tau_grad += float(np.sum((weights.grad / n) * np.where(first, 0.0, contrib)))

    loss = weights.diff * diff_term + weights.grad * grad_term
    if learn_threshold:
        ratio_grad *= intrinsics.dcpos_dratio_raw()
    if learn_refractory:
        tau_grad *= intrinsics.dtau_dtau_raw()
    return TotalLossResult(
        loss=float(loss), field_grad=grad, diff_term=diff_term,
        grad_term=grad_term, ratio_raw_grad=ratio_grad, tau_raw_grad=tau_grad,
        n_events=n)


@dataclass(frozen=True)
class AccumulationWindow:
    """Per-pixel event counts over one time bin."""

    x: int
    y: int
    channel: int
    t_a: float
    t_b: float
    n_pos: int
    n_neg: int


def accumulate_windows(stream: EventStream, window: float):
    """Partition a stream into per-pixel fixed-duration accumulation windows.

    Only bins that contain at least one event are kept, mirroring classic
    event-frame accumulation.  Returns parallel arrays packed as an
    AccumulationBatch.
    """
    if window <= 0:
        raise ValueError("window must be positive")
    n_bins = max(1, int(np.ceil(stream.duration / window - 1e-12)))
    bins = np.minimum(((stream.t_curr - stream.t_start) / window).astype(np.int64),
                      n_bins - 1)
    pix = stream.pixel_index()
    key = pix * n_bins + bins
    uniq, inv = np.unique(key, return_inverse=True)
    n_pos = np.zeros(len(uniq), dtype=np.int64)
    n_neg = np.zeros(len(uniq), dtype=np.int64)
    np.add.at(n_pos, inv, (stream.p > 0).astype(np.int64))
    np.add.at(n_neg, inv, (stream.p < 0).astype(np.int64))
    u_pix = uniq // n_bins
    u_bin = uniq % n_bins
    x = (u_pix % stream.geometry.width).astype(np.int64)
    y = (u_pix // stream.geometry.width).astype(np.int64)
    t_a = stream.t_start + u_bin * window
    t_b = np.minimum(t_a + window, stream.t_end)
    return AccumulationBatch(
        x=x, y=y, channel=stream.geometry.channel_of(x, y),
        t_a=t_a, t_b=t_b, n_pos=n_pos, n_neg=n_neg)


@dataclass
class AccumulationBatch:
    x: np.ndarray
    y: np.ndarray
    channel: np.ndarray
    t_a: np.ndarray
    t_b: np.ndarray
    n_pos: np.ndarray
    n_neg: np.ndarray

    def __len__(self):
        return len(self.x)

    def subset(self, indices) -> "AccumulationBatch":
        i = np.asarray(indices, dtype=np.int64)
        return AccumulationBatch(self.x[i], self.y[i], self.channel[i],
                                 self.t_a[i], self.t_b[i],
                                 self.n_pos[i], self.n_neg[i])


def accumulated_loss(batch: AccumulationBatch, scene, th: ThresholdParams,
                     weight: float = 1.0) -> TotalLossResult:
    """Mean accumulation-baseline loss over windows, with field gradients."""
    n = len(batch)
    if n == 0:
        raise EmptyBatch("cannot reduce an empty window batch")
    f_b, bp_b = scene.log_value_eval(batch.x, batch.y, batch.channel, batch.t_b)
    f_a, bp_a = scene.log_value_eval(batch.x, batch.y, batch.channel, batch.t_a)
    target = batch.n_pos * th.c_pos - batch.n_neg * th.c_neg
    r = (f_b - f_a - target) / th.mean
    loss = float(np.mean(r * r))
    grad = np.zeros(scene.n_params)
    coeff = (weight / n) * 2.0 * r / th.mean
    bp_b(coeff, grad)
    bp_a(-coeff, grad)
    return TotalLossResult(loss=weight * loss, field_grad=grad,
                           diff_term=loss, grad_term=0.0, n_events=n)
