import numpy as np
import pytest

from evfield.errors import BadMagic, FormatError
from evfield.eventfile import read_events, read_poses, write_events, write_poses
from evfield.events import SensorGeometry, validate_stream
from evfield.simulator import simulate
from evfield.sources import FourierSource
from evfield.thresholds import ThresholdParams
from evfield.trajectory import generate_spiral


def sample_stream(seed=0, color="none"):
    channels = 3 if color == "rggb" else 1
    src = FourierSource.random(4, 3, 4, 1.0, seed=seed, amplitude=1.2,
                               channels=channels)
    geo = SensorGeometry(4, 3, color)
    th = ThresholdParams(0.2, 0.3)
    if color == "rggb":
        from evfield.simulator import simulate_bayer
        return simulate_bayer(src, geo, th, 0.02, 0.005, 0.0, 1.0, seed=seed + 1)
    return simulate(src, geo, th, 0.02, 0.005, 0.0, 1.0, seed=seed + 1)


class TestEventFileRoundtrip:
    def test_exact_roundtrip_of_quantized_stream(self, tmp_path):
        stream = sample_stream()
        assert len(stream) > 20
        p1 = tmp_path / "a.ernf"
        write_events(p1, stream)
        back = read_events(p1)
        # one quantization to nanoseconds, then everything is exact
        assert np.array_equal(back.x, stream.x)
        assert np.array_equal(back.y, stream.y)
        assert np.array_equal(back.p, stream.p)
        assert np.max(np.abs(back.t_curr - stream.t_curr)) <= 0.5e-9
        assert np.max(np.abs(back.t_prev - stream.t_prev)) <= 0.5e-9
        assert validate_stream(back).ok

        # encode(decode(x)) is byte-identical
        p2 = tmp_path / "b.ernf"
        write_events(p2, back)
        assert p1.read_bytes() == p2.read_bytes()
        again = read_events(p2)
        assert np.array_equal(again.t_curr, back.t_curr)
        assert np.array_equal(again.t_prev, back.t_prev)

    def test_rggb_geometry_survives(self, tmp_path):
        stream = sample_stream(color="rggb")
        p = tmp_path / "c.ernf"
        write_events(p, stream)
        back = read_events(p)
        assert back.geometry.color_filter == "rggb"
        assert back.geometry.channels == 3

    def test_record_layout(self, tmp_path):
        stream = sample_stream()
        p = tmp_path / "d.ernf"
        write_events(p, stream)
        raw = p.read_bytes()
        assert raw[:4] == b"ERNF"
        assert raw[4] == 1
        header_size = 4 + 1 + 2 + 2 + 1 + 1 + 8 + 8 + 8
        assert len(raw) == header_size + 16 * len(stream)
        # records sorted by (t, y, x)
        rec = np.frombuffer(raw[header_size:], dtype=[
            ("x", "<u2"), ("y", "<u2"), ("p", "<i1"), ("r", "<u1"),
            ("pad", "<u2"), ("t", "<i8")])
        key = np.lexsort((rec["x"], rec["y"], rec["t"]))
        assert np.array_equal(key, np.arange(len(rec)))

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "bad.ernf"
        p.write_bytes(b"XXXX" + bytes(60))
        with pytest.raises(BadMagic):
            read_events(p)

    def test_truncated_body(self, tmp_path):
        stream = sample_stream()
        p = tmp_path / "e.ernf"
        write_events(p, stream)
        data = p.read_bytes()
        p.write_bytes(data[:-16])
        with pytest.raises(FormatError):
            read_events(p)

    def test_empty_stream(self, tmp_path):
        from evfield.events import EventStream
        s = EventStream(SensorGeometry(2, 2), [], [], [], [], [], 0.0, 1.0)
        p = tmp_path / "empty.ernf"
        write_events(p, s)
        back = read_events(p)
        assert len(back) == 0
        assert back.t_start == 0.0 and back.t_end == 1.0


class TestPoseFile:
    def test_roundtrip(self, tmp_path):
        traj = generate_spiral(2.0, 1.0, 2.0, 4.0, 1.0, duration=1.0, rate=100.0)
        p = tmp_path / "poses.txt"
        write_poses(p, traj)
        times, pos, quat = read_poses(p)
        assert np.allclose(times, traj.times, atol=1e-15)
        assert np.allclose(pos, traj.positions, atol=1e-15)
        assert np.allclose(quat, traj.orientations, atol=1e-15)

    def test_rejects_malformed_rows(self, tmp_path):
        p = tmp_path / "bad.txt"
        p.write_text("0.0 1.0 2.0\n")
        with pytest.raises(FormatError):
            read_poses(p)
