import numpy as np
import pytest

from evfield.errors import NoIntervals
from evfield.events import Event, EventStream, SensorGeometry
from evfield.fields import TemporalSignalField, softplus_inv
from evfield.losses import LossWeights
from evfield.simulator import simulate
from evfield.sources import SignalSource
from evfield.thresholds import ThresholdParams
from evfield.toy import toy_signal_field
from evfield.trainer import (CLAMP_EPS, LearnableIntrinsics, TrainConfig,
                             TrainState, fit, load_train_state,
                             refractory_raw_lr, save_train_state,
                             tau_max_from_stream)


def make_stream(events, width=4, height=4, t_start=0.0, t_end=1.0):
    return EventStream.from_events(SensorGeometry(width, height), events,
                                   t_start, t_end)


class TestTauMax:
    def test_min_pair_interval(self):
        s = make_stream([Event(0, 0, 1, 0.0, 0.1), Event(0, 0, 1, 0.1, 0.3),
                         Event(0, 0, 1, 0.3, 0.35)])
        # intervals 0.2 and 0.05; the first event's gap from t_start is excluded
        assert tau_max_from_stream(s) == pytest.approx(0.05)

    def test_ramp_with_refractory(self):
        from evfield.sources import RampSource
        s = simulate(RampSource(1.0), SensorGeometry(1, 1),
                     ThresholdParams.symmetric(0.25), 0.0, 0.3, 0.0, 1.0, seed=0)
        assert tau_max_from_stream(s) == pytest.approx(0.55, abs=1e-8)

    def test_no_intervals(self):
        s = make_stream([Event(0, 0, 1, 0.0, 0.1), Event(1, 0, 1, 0.0, 0.2)])
        with pytest.raises(NoIntervals):
            tau_max_from_stream(s)


class TestLearnableIntrinsics:
    def test_fixed_values_roundtrip(self):
        th = ThresholdParams(0.25, 0.6)
        intr = LearnableIntrinsics.from_values(th, 0.015)
        assert intr.c_pos == pytest.approx(0.6, rel=1e-12)
        assert intr.tau == pytest.approx(0.015, rel=1e-12)

    def test_zero_tau(self):
        intr = LearnableIntrinsics.from_values(ThresholdParams.symmetric(0.25), 0.0)
        assert intr.tau == 0.0
        assert intr.dtau_dtau_raw() == 0.0

    def test_learning_init_at_half_range(self):
        intr = LearnableIntrinsics.for_learning(0.25, 10.0, tau_max=0.08)
        assert intr.ratio == pytest.approx(10.0, rel=1e-12)
        assert intr.tau == pytest.approx(0.04, rel=1e-12)

    def test_tau_stays_in_clamp_range(self):
        intr = LearnableIntrinsics(0.25, 0.0, tau_raw=100.0, tau_max=0.1)
        assert intr.tau <= (1 - CLAMP_EPS) * 0.1 + 1e-15
        intr.tau_raw = -100.0
        intr.project()
        assert intr.tau >= CLAMP_EPS * 0.1 - 1e-15
        # slope never collapses inside the projected interval
        assert intr.dtau_dtau_raw() >= CLAMP_EPS * (1 - CLAMP_EPS) * 0.1 * 0.99

    def test_chain_rule_slopes(self):
        intr = LearnableIntrinsics(0.25, 0.7, 0.3, 0.05)
        h = 1e-7
        up = LearnableIntrinsics(0.25, 0.7 + h, 0.3, 0.05)
        dn = LearnableIntrinsics(0.25, 0.7 - h, 0.3, 0.05)
        assert intr.dcpos_dratio_raw() == pytest.approx(
            (up.c_pos - dn.c_pos) / (2 * h), rel=1e-6)
        up = LearnableIntrinsics(0.25, 0.7, 0.3 + h, 0.05)
        dn = LearnableIntrinsics(0.25, 0.7, 0.3 - h, 0.05)
        assert intr.dtau_dtau_raw() == pytest.approx(
            (up.tau - dn.tau) / (2 * h), rel=1e-6)


def sinusoid_setup(tau=0.0, ratio=1.0, seed=0):
    gt = toy_signal_field(2, 2, harmonics=6, period=1.0, seed=seed,
                          amplitude=1.2, base_freq=3)
    th = ThresholdParams.from_ratio(0.25, ratio)
    stream = simulate(SignalSource(gt), SensorGeometry(2, 2), th, 0.0, tau,
                      0.0, 1.0, seed=seed + 1)
    return gt, stream, th


class TestFit:
    def test_zero_iterations_is_identity(self):
        gt, stream, th = sinusoid_setup()
        model = TemporalSignalField(2, 2, 6, 1.0)
        before = model.get_params().copy()
        cfg = TrainConfig(iterations=0, c_neg=0.25, init_ratio=1.0, tau=0.0)
        state = fit(stream, None, model, cfg, seed=0)
        assert np.array_equal(model.get_params(), before)
        assert state.iteration == 0
        assert state.trace.shape == (0, 4)

    def test_recovers_signal_up_to_offset(self):
        gt, stream, th = sinusoid_setup()
        model = TemporalSignalField(2, 2, 6, 1.0)
        cfg = TrainConfig(iterations=1500, c_neg=0.25, init_ratio=1.0, tau=0.0)
        fit(stream, None, model, cfg, seed=0)
        t = np.linspace(0, 1, 101)
        for pix in range(4):
            x = np.full_like(t, pix % 2, dtype=int)
            y = np.full_like(t, pix // 2, dtype=int)
            pred = model.log_radiance(x, y, t)
            true = gt.log_radiance(x, y, t)
            centered = (pred - pred.mean()) - (true - true.mean())
            assert np.sqrt(np.mean(centered ** 2)) < 0.05

    def test_deterministic(self):
        gt, stream, th = sinusoid_setup()
        params = []
        for _ in range(2):
            model = TemporalSignalField(2, 2, 6, 1.0)
            cfg = TrainConfig(iterations=200, c_neg=0.25, init_ratio=1.0, tau=0.0)
            fit(stream, None, model, cfg, seed=3)
            params.append(model.get_params())
        assert np.array_equal(params[0], params[1])

    def test_loss_trace_decreases_on_average(self):
        gt, stream, th = sinusoid_setup()
        model = TemporalSignalField(2, 2, 6, 1.0)
        cfg = TrainConfig(iterations=2500, c_neg=0.25, init_ratio=1.0, tau=0.0)
        state = fit(stream, None, model, cfg, seed=0)
        assert np.mean(state.trace[-1000:, 1]) < np.mean(state.trace[:1000, 1])

    def test_c_neg_stays_fixed_when_learning_ratio(self):
        gt, stream, th = sinusoid_setup(ratio=2.0)
        model = TemporalSignalField(2, 2, 6, 1.0)
        cfg = TrainConfig(iterations=300, c_neg=0.25, init_ratio=10.0)
        state = fit(stream, None, model, cfg, learn_threshold=True, seed=0)
        assert state.intrinsics.c_neg == 0.25
        assert state.intrinsics.ratio != pytest.approx(10.0)

    def test_tau_stays_in_clamp_range_throughout(self):
        gt, stream, th = sinusoid_setup(tau=0.01)
        model = TemporalSignalField(2, 2, 6, 1.0)
        cfg = TrainConfig(iterations=400, c_neg=0.25, init_ratio=1.0)
        state = fit(stream, None, model, cfg, learn_refractory=True, seed=0)
        tau_max = tau_max_from_stream(stream)
        taus = state.trace[:, 3]
        assert np.all(taus >= CLAMP_EPS * tau_max - 1e-15)
        assert np.all(taus <= (1 - CLAMP_EPS) * tau_max + 1e-15)

    def test_invalid_stream_rejected(self):
        bad = make_stream([Event(0, 0, 1, 0.0, 0.2), Event(0, 0, 1, 0.1, 0.3)])
        model = TemporalSignalField(4, 4, 2, 1.0)
        with pytest.raises(ValueError):
            fit(bad, None, model, TrainConfig(iterations=1), seed=0)

    def test_refractory_raw_lr_scales_with_range(self):
        cfg = TrainConfig()
        a = LearnableIntrinsics.for_learning(0.25, 1.0, tau_max=0.02)
        b = LearnableIntrinsics.for_learning(0.25, 1.0, tau_max=0.04)
        assert refractory_raw_lr(cfg, b) == pytest.approx(
            2 * refractory_raw_lr(cfg, a))
        assert refractory_raw_lr(cfg, a) == pytest.approx(50.0 * 0.02)


class TestBatchBudget:
    def test_batch_size_hits_sample_budget(self):
        from evfield.fields import VoxelScene, VoxelField
        from evfield.trajectory import CameraIntrinsics, generate_spiral
        field = VoxelField.initialized(4, (-1,) * 3, (1,) * 3, 1, seed=0)
        traj = generate_spiral(3.0, 1.0, 1.0, 1.0, 1.0, 1.0, 100.0)
        cam = CameraIntrinsics.from_fov(4, 4, 40.0)
        scene = VoxelScene(field, traj, cam, n_samples=64)
        budget = 2 ** 16
        batch = round(budget / scene.samples_per_event)
        assert abs(batch * scene.samples_per_event - budget) <= 0.1 * budget


class TestSidecar:
    def test_roundtrip(self, tmp_path):
        intr = LearnableIntrinsics(0.25, 0.37, -0.12, 0.05)
        state = TrainState(field=None, intrinsics=intr,
                           m=np.arange(5.0), v=np.arange(5.0) ** 2,
                           iteration=123, trace=np.empty((0, 4)),
                           learn_threshold=True, learn_refractory=False)
        p = tmp_path / "state.evts"
        save_train_state(p, state)
        intr2, m, v, iteration, flags = load_train_state(p)
        assert intr2.c_neg == intr.c_neg
        assert intr2.ratio_raw == intr.ratio_raw
        assert intr2.tau_raw == intr.tau_raw
        assert intr2.tau_max == intr.tau_max
        assert np.array_equal(m, state.m) and np.array_equal(v, state.v)
        assert iteration == 123
        assert flags == {"learn_threshold": True, "learn_refractory": False}
