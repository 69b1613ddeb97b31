import numpy as np
import pytest

from evfield.errors import ChannelMismatch, InvalidParams, NonFiniteRadiance
from evfield.events import SensorGeometry, reference_times, validate_stream
from evfield.simulator import simulate, simulate_bayer
from evfield.sources import ConstantSource, FourierSource, RampSource
from evfield.thresholds import ThresholdParams


GEO1 = SensorGeometry(1, 1)
TH = ThresholdParams.symmetric(0.25)


class TestRampOracle:
    """Analytic crossing times of the unit-slope log-radiance ramp."""

    def test_tau_zero(self):
        s = simulate(RampSource(1.0), GEO1, TH, 0.0, 0.0, 0.0, 1.0, seed=0)
        assert np.allclose(s.t_curr, [0.25, 0.5, 0.75, 1.0], atol=1e-8)
        assert np.all(s.p == 1)

    def test_tau_dead_time(self):
        # refractory 0.3: event at 0.25, reference resets at 0.55, next at 0.80
        s = simulate(RampSource(1.0), GEO1, TH, 0.0, 0.3, 0.0, 1.0, seed=0)
        assert np.allclose(s.t_curr, [0.25, 0.80], atol=1e-8)

    def test_constant_source_is_silent(self):
        s = simulate(ConstantSource(3.0), GEO1, TH, 0.0, 0.0, 0.0, 1.0, seed=0)
        assert len(s) == 0

    def test_negated_ramp_flips_polarity_only(self):
        pos = simulate(RampSource(1.0), GEO1, TH, 0.0, 0.0, 0.0, 1.0, seed=0)
        neg = simulate(RampSource(-1.0), GEO1, TH, 0.0, 0.0, 0.0, 1.0, seed=0)
        assert np.allclose(pos.t_curr, neg.t_curr, atol=1e-12)
        assert np.all(neg.p == -1)

    def test_event_count_on_monotone_ramp(self):
        # total rise R with threshold c gives exactly floor(R / c) events
        for slope, c in [(1.0, 0.25), (2.0, 0.3), (0.7, 0.2)]:
            s = simulate(RampSource(slope), GEO1, ThresholdParams.symmetric(c),
                         0.0, 0.0, 0.0, 1.0, seed=0)
            assert len(s) == int(np.floor(slope / c + 1e-12))


class TestEventModelInvariants:
    def test_simulated_streams_validate(self):
        src = FourierSource.random(3, 3, 4, 1.0, seed=2, amplitude=1.0)
        s = simulate(src, SensorGeometry(3, 3), TH, 0.02, 0.01, 0.0, 1.0, seed=4)
        assert len(s) > 0
        assert validate_stream(s).ok

    def test_intervals_exceed_refractory(self):
        src = FourierSource.random(3, 3, 4, 1.0, seed=2, amplitude=1.5)
        tau = 0.02
        s = simulate(src, SensorGeometry(3, 3), TH, 0.0, tau, 0.0, 1.0, seed=4)
        assert np.all(s.pair_intervals() > tau)

    def test_refractory_only_sparsifies(self):
        src = FourierSource.random(3, 3, 4, 1.0, seed=2, amplitude=1.5)
        dense = simulate(src, SensorGeometry(3, 3), TH, 0.0, 0.0, 0.0, 1.0, seed=4)
        sparse = simulate(src, SensorGeometry(3, 3), TH, 0.0, 0.05, 0.0, 1.0, seed=4)
        assert len(sparse) <= len(dense)

    def test_threshold_residual_against_source(self):
        """Every event's measured change equals its pixel's realised threshold."""
        src = FourierSource.random(2, 2, 5, 1.0, seed=9, amplitude=1.2)
        s, tmap = simulate(src, SensorGeometry(2, 2), TH, 0.03, 0.005, 0.0, 1.0,
                           seed=3, return_threshold_map=True)
        assert len(s) > 10
        t_ref = reference_times(s.t_prev, s.t_curr, 0.005, s.t_start)
        ch = s.channel()
        delta = (src.log_radiance(s.x, s.y, s.t_curr, ch)
                 - src.log_radiance(s.x, s.y, t_ref, ch))
        c_here = tmap.at(s.x, s.y, s.p)
        assert np.max(np.abs(delta - s.p * c_here)) < 2e-9

    def test_determinism_across_workers(self):
        src = FourierSource.random(4, 4, 4, 1.0, seed=5, amplitude=1.0)
        geo = SensorGeometry(4, 4)
        a = simulate(src, geo, TH, 0.03, 0.01, 0.0, 1.0, seed=6, workers=1)
        b = simulate(src, geo, TH, 0.03, 0.01, 0.0, 1.0, seed=6, workers=4)
        assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)
        assert np.array_equal(a.p, b.p)
        assert np.array_equal(a.t_curr, b.t_curr)
        assert np.array_equal(a.t_prev, b.t_prev)

    def test_canonical_ordering(self):
        src = FourierSource.random(4, 4, 4, 1.0, seed=5, amplitude=1.0)
        s = simulate(src, SensorGeometry(4, 4), TH, 0.0, 0.0, 0.0, 1.0, seed=6)
        key = np.lexsort((s.pixel_index(), s.t_curr))
        assert np.array_equal(key, np.arange(len(s)))

    def test_nonfinite_source_raises(self):
        class BadSource:
            channels = 1

            def log_radiance(self, x, y, t, channel):
                return np.where(np.asarray(t) > 0.5, np.nan, 0.0)

        with pytest.raises(NonFiniteRadiance):
            simulate(BadSource(), GEO1, TH, 0.0, 0.0, 0.0, 1.0, seed=0)

    def test_invalid_window(self):
        with pytest.raises(InvalidParams):
            simulate(RampSource(), GEO1, TH, 0.0, 0.0, 1.0, 1.0, seed=0)
        with pytest.raises(InvalidParams):
            simulate(RampSource(), GEO1, TH, -0.1, 0.0, 0.0, 1.0, seed=0)


class TestBayer:
    def make_source(self, ramp_channels=(0, 1, 2)):
        class PerChannelRamp:
            channels = 3

            def log_radiance(self, x, y, t, channel):
                t = np.asarray(t, dtype=np.float64)
                ch = np.asarray(channel)
                out = np.zeros_like(t)
                for c in ramp_channels:
                    out = np.where(ch == c, t, out)
                return out

        return PerChannelRamp()

    def test_constant_channel_pixels_are_silent(self):
        # R constant, G and B ramp: even/even pixels emit nothing
        src = self.make_source(ramp_channels=(1, 2))
        geo = SensorGeometry(4, 4, "rggb")
        s = simulate_bayer(src, geo, TH, 0.0, 0.0, 0.0, 1.0, seed=0)
        red = (s.x % 2 == 0) & (s.y % 2 == 0)
        assert len(s) > 0 and not np.any(red)

    def test_identical_channels_match_mono(self):
        src = self.make_source()
        geo_b = SensorGeometry(4, 4, "rggb")
        geo_m = SensorGeometry(4, 4, "none")
        b = simulate_bayer(src, geo_b, TH, 0.0, 0.0, 0.0, 1.0, seed=1)
        m = simulate(RampSource(1.0), geo_m, TH, 0.0, 0.0, 0.0, 1.0, seed=1)
        assert np.array_equal(b.t_curr, m.t_curr)
        assert np.array_equal(b.x, m.x) and np.array_equal(b.y, m.y)

    def test_pixel_11_depends_only_on_blue(self):
        geo = SensorGeometry(2, 2, "rggb")
        only_b = simulate_bayer(self.make_source(ramp_channels=(2,)), geo, TH,
                                0.0, 0.0, 0.0, 1.0, seed=0)
        assert set(zip(only_b.x, only_b.y)) == {(1, 1)}
        no_b = simulate_bayer(self.make_source(ramp_channels=(0, 1)), geo, TH,
                              0.0, 0.0, 0.0, 1.0, seed=0)
        assert (1, 1) not in set(zip(no_b.x, no_b.y))

    def test_channel_mismatch(self):
        with pytest.raises(ChannelMismatch):
            simulate_bayer(RampSource(), SensorGeometry(2, 2, "rggb"), TH,
                           0.0, 0.0, 0.0, 1.0, seed=0)

    def test_needs_rggb_geometry(self):
        with pytest.raises(InvalidParams):
            simulate_bayer(self.make_source(), SensorGeometry(2, 2, "none"), TH,
                           0.0, 0.0, 0.0, 1.0, seed=0)


class TestDiscretizationIndependence:
    def test_halving_step_bound_keeps_timestamps(self):
        import evfield.simulator as sim
        src = FourierSource.random(2, 2, 4, 1.0, seed=12, amplitude=1.0)
        geo = SensorGeometry(2, 2)
        a = simulate(src, geo, TH, 0.0, 0.0, 0.0, 1.0, seed=0)
        old = sim.MAX_STEP_FRAC
        try:
            sim.MAX_STEP_FRAC = old / 2
            b = simulate(src, geo, TH, 0.0, 0.0, 0.0, 1.0, seed=0)
        finally:
            sim.MAX_STEP_FRAC = old
        assert len(a) == len(b)
        assert np.max(np.abs(a.t_curr - b.t_curr)) <= 1e-9
