import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evfield.errors import EmptyBatch, EmptyInterval
from evfield.events import SensorGeometry
from evfield.fields import TemporalSignalField, make_scene
from evfield.losses import (EventBatch, LossWeights, accumulate_windows,
                            accumulated_loss, loss_accumulated, loss_diff,
                            loss_grad, sample_t_sam, t_sam_units, total_loss)
from evfield.simulator import simulate
from evfield.sources import FourierSource
from evfield.thresholds import ThresholdParams
from evfield.trainer import LearnableIntrinsics

ratio_strategy = st.floats(min_value=1e-2, max_value=1e2)
scale_strategy = st.floats(min_value=1e-6, max_value=1e6)


class TestLossDiff:
    def test_exact_consistency_is_zero(self):
        th = ThresholdParams(0.2, 0.5)
        assert loss_diff(0.5, 1, th) == 0.0
        assert loss_diff(-0.2, -1, th) == 0.0

    def test_symmetric_zero_prediction(self):
        th = ThresholdParams.symmetric(0.25)
        assert loss_diff(0.0, 1, th) == pytest.approx(1.0)

    def test_poor_init_worked_example(self):
        # asymmetric 0.25/2.5, negative event, prediction -0.5
        th = ThresholdParams(0.25, 2.5)
        assert loss_diff(-0.5, -1, th) == pytest.approx(0.033058, abs=1e-6)

    @given(ratio=ratio_strategy, k=scale_strategy,
           delta=st.floats(-3, 3), p=st.sampled_from([-1, 1]))
    @settings(max_examples=200, deadline=None)
    def test_common_scale_invariance(self, ratio, k, delta, p):
        th = ThresholdParams.from_ratio(0.25, ratio)
        a = loss_diff(delta, p, th)
        b = loss_diff(k * delta, p, th.scaled(k))
        assert b == pytest.approx(a, rel=1e-12, abs=1e-300)


class TestLossGrad:
    def test_exact_prediction(self):
        th = ThresholdParams.symmetric(0.25)
        target = 0.25 / 0.5
        assert loss_grad(target, 1, th, 0.0, 0.5) == 0.0

    def test_zero_prediction_gives_one(self):
        th = ThresholdParams.symmetric(0.25)
        assert loss_grad(0.0, 1, th, 0.0, 0.5) == pytest.approx(1.0)
        assert loss_grad(0.0, -1, th, 0.1, 0.5) == pytest.approx(1.0)

    def test_empty_interval(self):
        th = ThresholdParams.symmetric(0.25)
        with pytest.raises(EmptyInterval):
            loss_grad(1.0, 1, th, 0.5, 0.5)

    @given(s=st.floats(min_value=1e-6, max_value=1e6),
           pred=st.floats(-10, 10), p=st.sampled_from([-1, 1]),
           ratio=ratio_strategy)
    @settings(max_examples=200, deadline=None)
    def test_time_rescale_invariance(self, s, pred, p, ratio):
        # rescaling time scales prediction and target equally
        th = ThresholdParams.from_ratio(0.25, ratio)
        a = loss_grad(pred, p, th, 1.0, 1.5)
        b = loss_grad(pred / s, p, th, s * 1.0, s * 1.5)
        assert b == pytest.approx(a, rel=1e-12, abs=1e-300)


class TestLossAccumulated:
    def test_no_events_zero_prediction(self):
        th = ThresholdParams.symmetric(0.25)
        assert loss_accumulated([], 0.0, th) == 0.0

    def test_worked_example(self):
        # 2 positive + 1 negative at 0.25: target 0.25
        th = ThresholdParams.symmetric(0.25)
        assert loss_accumulated([1, 1, -1], 0.25, th) == 0.0

    def test_cancellation(self):
        th = ThresholdParams.symmetric(0.25)
        assert loss_accumulated([1, -1, 1, -1, 1, -1], 0.0, th) == 0.0


class TestSampleTSam:
    def test_strictly_inside(self):
        rng = np.random.default_rng(0)
        draws = sample_t_sam(2.0, 3.0, rng, size=20000)
        assert np.all((draws > 2.0) & (draws < 3.0))

    def test_moments_match_truncated_normal(self):
        # oracle: numerically integrated moments of N(mid, (L/4)^2) on (0, 1)
        from scipy import integrate
        from scipy.stats import norm
        pdf = lambda x: norm.pdf(x, 0.5, 0.25)
        z, _ = integrate.quad(pdf, 0.0, 1.0)
        mean, _ = integrate.quad(lambda x: x * pdf(x) / z, 0.0, 1.0)
        second, _ = integrate.quad(lambda x: x * x * pdf(x) / z, 0.0, 1.0)
        std = np.sqrt(second - mean ** 2)
        assert mean == pytest.approx(0.5, abs=1e-12)
        assert std == pytest.approx(0.2199, abs=1e-4)   # truncation shrinks 0.25

        rng = np.random.default_rng(7)
        draws = sample_t_sam(0.0, 1.0, rng, size=100_000)
        se = std / np.sqrt(draws.size)
        assert np.mean(draws) == pytest.approx(mean, abs=3 * se)
        assert np.std(draws) == pytest.approx(std, abs=3e-3)

    def test_scalar_draw(self):
        rng = np.random.default_rng(1)
        v = sample_t_sam(1.0, 1.5, rng)
        assert isinstance(v, float) and 1.0 < v < 1.5

    def test_empty_interval(self):
        with pytest.raises(EmptyInterval):
            sample_t_sam(1.0, 1.0, np.random.default_rng(0))

    def test_frozen_units_reproducible(self):
        idx = np.arange(1000)
        a = t_sam_units(3, idx)
        b = t_sam_units(3, idx)
        c = t_sam_units(4, idx)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)
        assert np.all((a > 0) & (a < 1))
        assert np.mean(a) == pytest.approx(0.5, abs=0.03)


def small_scene_and_stream(seed=0, tau=0.01):
    src = FourierSource.random(2, 2, 4, 1.0, seed=seed, amplitude=1.2)
    geo = SensorGeometry(2, 2)
    th = ThresholdParams(0.2, 0.4)
    stream = simulate(src, geo, th, 0.0, tau, 0.0, 1.0, seed=seed + 1)
    field = TemporalSignalField(2, 2, 4, 1.0)
    rng = np.random.default_rng(seed + 2)
    field.coeffs[:] = 0.4 * rng.standard_normal(field.coeffs.shape)
    return make_scene(field), stream, th


class TestTotalLoss:
    def test_empty_batch(self):
        scene, stream, th = small_scene_and_stream()
        intr = LearnableIntrinsics.from_values(th, 0.01)
        with pytest.raises(EmptyBatch):
            total_loss(EventBatch.from_stream(stream, np.array([], dtype=int)),
                       scene, intr, LossWeights(), t_sam_seed=0)

    def test_matching_field_and_thresholds_zero_diff_loss(self):
        src = FourierSource.random(2, 2, 4, 1.0, seed=3, amplitude=1.0)
        geo = SensorGeometry(2, 2)
        th = ThresholdParams.symmetric(0.25)
        stream = simulate(src, geo, th, 0.0, 0.0, 0.0, 1.0, seed=1)
        scene = make_scene(src.fields[0])
        intr = LearnableIntrinsics.from_values(th, 0.0)
        res = total_loss(EventBatch.from_stream(stream), scene, intr,
                         LossWeights(1.0, 0.0), t_sam_seed=0)
        assert res.loss < 1e-16
        assert np.max(np.abs(res.field_grad)) < 1e-6

    def test_diff_term_threshold_scale_invariance(self):
        scene, stream, th = small_scene_and_stream()
        batch = EventBatch.from_stream(stream)
        base = total_loss(batch, scene, LearnableIntrinsics.from_values(th, 0.01),
                          LossWeights(1.0, 0.0), t_sam_seed=0)
        # double thresholds and a field whose log-radiance doubles
        doubled = make_scene(scene.field.__class__(2, 2, 4, 1.0,
                                                   coeffs=2 * scene.field.coeffs))
        res = total_loss(batch, doubled,
                         LearnableIntrinsics.from_values(th.scaled(2.0), 0.01),
                         LossWeights(1.0, 0.0), t_sam_seed=0)
        assert res.diff_term == pytest.approx(base.diff_term, rel=1e-12)

    def test_deterministic_in_seed(self):
        scene, stream, th = small_scene_and_stream()
        intr = LearnableIntrinsics.from_values(th, 0.01)
        batch = EventBatch.from_stream(stream)
        a = total_loss(batch, scene, intr, LossWeights(), t_sam_seed=5)
        b = total_loss(batch, scene, intr, LossWeights(), t_sam_seed=5)
        assert a.loss == b.loss
        assert np.array_equal(a.field_grad, b.field_grad)

    def test_batch_independence_of_t_sam(self):
        # per-event supervision time depends on the global index, not the batch
        scene, stream, th = small_scene_and_stream()
        intr = LearnableIntrinsics.from_values(th, 0.01)
        full = total_loss(EventBatch.from_stream(stream), scene, intr,
                          LossWeights(), t_sam_seed=5)
        n = len(stream)
        half1 = total_loss(EventBatch.from_stream(stream, np.arange(n // 2)),
                           scene, intr, LossWeights(), t_sam_seed=5)
        half2 = total_loss(EventBatch.from_stream(stream, np.arange(n // 2, n)),
                           scene, intr, LossWeights(), t_sam_seed=5)
        w1 = (n // 2) / n
        assert full.loss == pytest.approx(w1 * half1.loss + (1 - w1) * half2.loss,
                                          rel=1e-12)


class TestAccumulationWindows:
    def test_counts_and_coverage(self):
        src = FourierSource.random(2, 2, 4, 1.0, seed=3, amplitude=1.2)
        geo = SensorGeometry(2, 2)
        th = ThresholdParams.symmetric(0.25)
        stream = simulate(src, geo, th, 0.0, 0.0, 0.0, 1.0, seed=1)
        win = accumulate_windows(stream, 0.25)
        assert np.sum(win.n_pos) == int(np.sum(stream.p > 0))
        assert np.sum(win.n_neg) == int(np.sum(stream.p < 0))
        assert np.all(win.t_b > win.t_a)
        assert np.all(win.n_pos + win.n_neg >= 1)

    def test_accumulated_loss_on_true_field(self):
        # with sigma=0 the true field reproduces every window target exactly
        src = FourierSource.random(2, 2, 3, 1.0, seed=8, amplitude=1.0)
        geo = SensorGeometry(2, 2)
        th = ThresholdParams.symmetric(0.25)
        stream = simulate(src, geo, th, 0.0, 0.0, 0.0, 1.0, seed=2)
        win = accumulate_windows(stream, 0.5)
        scene = make_scene(src.fields[0])
        res = accumulated_loss(win, scene, th)
        # window targets quantize the change to whole thresholds: small but
        # nonzero residual (the truncation error of accumulation)
        assert res.loss < 1.0
