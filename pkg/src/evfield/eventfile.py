"""Bit-exact binary event files and plain-text pose files.

Event file layout (version 1, all little-endian):

    magic   4 bytes  "ERNF"
    version u8       1
    width   u16      sensor width in pixels
    height  u16      sensor height
    channels u8      1 (mono) or 3 (RGGB)
    reserved u8      0
    t_start i64      stream start, integer nanoseconds
    t_end   i64      stream end, integer nanoseconds
    count   u64      number of records
    records 16 bytes each: x u16, y u16, polarity i8, reserved u8,
                           padding u16, t_curr i64 (nanoseconds)

Records are sorted by (t_curr, y, x).  Previous-event timestamps are not
stored; they are rebuilt on load from per-pixel history and t_start, which
the sort order makes unambiguous.  Timestamps quantize to 1 ns with
round-half-even, so encode(decode(x)) is byte-identical.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import BadMagic, FormatError
from .events import EventStream, SensorGeometry

MAGIC = b"ERNF"
VERSION = 1
_HEADER = struct.Struct("<4sBHHBBqqQ")
_RECORD_DTYPE = np.dtype([
    ("x", "<u2"), ("y", "<u2"), ("p", "<i1"), ("reserved", "<u1"),
    ("pad", "<u2"), ("t", "<i8"),
])

NS = 1_000_000_000


def _to_ns(seconds) -> np.ndarray:
    return np.rint(np.asarray(seconds, dtype=np.float64) * NS).astype(np.int64)


def write_events(path, stream: EventStream):
    """Encode a stream; canonical record order makes encoding idempotent."""
    t_ns = _to_ns(stream.t_curr)
    order = np.lexsort((stream.x, stream.y, t_ns))
    rec = np.zeros(len(stream), dtype=_RECORD_DTYPE)
    rec["x"] = stream.x[order]
    rec["y"] = stream.y[order]
    rec["p"] = stream.p[order]
    rec["t"] = t_ns[order]
    g = stream.geometry
    header = _HEADER.pack(MAGIC, VERSION, g.width, g.height, g.channels, 0,
                          int(_to_ns(stream.t_start)), int(_to_ns(stream.t_end)),
                          len(stream))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(rec.tobytes())


def read_events(path) -> EventStream:
    """Decode an event file, rebuilding per-pixel t_prev linkage."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise FormatError(f"{path}: truncated header")
        magic, version, width, height, channels, _, t_start_ns, t_end_ns, count = \
            _HEADER.unpack(head)
        if magic != MAGIC:
            raise BadMagic(f"{path}: expected {MAGIC!r}, got {magic!r}")
        if version != VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        body = fh.read()
    rec = np.frombuffer(body, dtype=_RECORD_DTYPE)
    if rec.size != count:
        raise FormatError(f"{path}: header promises {count} records, found {rec.size}")
    if channels == 3:
        geometry = SensorGeometry(width, height, "rggb")
    elif channels == 1:
        geometry = SensorGeometry(width, height, "none")
    else:
        raise FormatError(f"{path}: unsupported channel count {channels}")

    x = rec["x"].astype(np.int64)
    y = rec["y"].astype(np.int64)
    p = rec["p"].astype(np.int64)
    t_curr = rec["t"].astype(np.float64) / NS
    t_start = t_start_ns / NS
    t_end = t_end_ns / NS

    # rebuild t_prev: previous record at the same pixel, else t_start
    pix = y * width + x
    order = np.argsort(pix, kind="stable")  # records are already time-sorted
    t_prev = np.empty(len(rec), dtype=np.float64)
    pix_s = pix[order]
    tc_s = t_curr[order]
    first = np.empty(len(rec), dtype=bool)
    if len(rec):
        first[0] = True
        first[1:] = pix_s[1:] != pix_s[:-1]
    tp_s = np.empty_like(tc_s)
    tp_s[first] = t_start
    nonfirst = np.flatnonzero(~first)
    tp_s[nonfirst] = tc_s[nonfirst - 1]
    t_prev[order] = tp_s
    return EventStream(geometry, x, y, p, t_prev, t_curr, t_start, t_end)


def write_poses(path, trajectory):
    """One row per sample: t px py pz qw qx qy qz."""
    with open(path, "w") as fh:
        fh.write("# t px py pz qw qx qy qz\n")
        for t, pos, quat in zip(trajectory.times, trajectory.positions,
                                trajectory.orientations):
            row = [t, *pos, *quat]
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def read_poses(path):
    """Read a pose file; returns (times, positions, quaternions) arrays."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            vals = [float(v) for v in line.split()]
            if len(vals) != 8:
                raise FormatError(f"{path}: pose rows need 8 values, got {len(vals)}")
            rows.append(vals)
    if not rows:
        raise FormatError(f"{path}: no pose rows")
    arr = np.asarray(rows, dtype=np.float64)
    return arr[:, 0], arr[:, 1:4], arr[:, 4:8]
