"""Event, event stream and sensor geometry types, plus stream-level checks.

An event records that the log-radiance at one pixel moved by one contrast
threshold since its reference level.  Streams carry, for every event, the
timestamp of the previous event at the same pixel (the stream start time for
a pixel's first event), which is what downstream losses need to rebuild the
reference timestamp.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryMismatch, RefractoryExceedsInterval

EVENT_BITS = 47          # decompressed size of one event record on the wire
IMAGE_BITS_PER_VALUE = 8  # reference image depth used for the equivalence ratio


@dataclass(frozen=True)
class SensorGeometry:
    """Pixel array layout of the (virtual) event sensor."""

    width: int
    height: int
    color_filter: str = "none"  # "none" or "rggb"

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("sensor must be at least 1x1")
        if self.color_filter not in ("none", "rggb"):
            raise ValueError(f"unknown color filter {self.color_filter!r}")

    @property
    def channels(self) -> int:
        return 3 if self.color_filter == "rggb" else 1

    @property
    def n_pixels(self) -> int:
        return self.width * self.height

    def pixel_index(self, x, y):
        return np.asarray(y) * self.width + np.asarray(x)

    def channel_of(self, x, y):
        """Spectral channel each pixel observes (0 everywhere for mono)."""
        x = np.asarray(x)
        y = np.asarray(y)
        if self.color_filter == "none":
            return np.zeros(np.broadcast(x, y).shape, dtype=np.int64)
        # RGGB: R at (even row, even col), B at (odd, odd), G elsewhere.
        ch = np.ones(np.broadcast(x, y).shape, dtype=np.int64)
        ch[(y % 2 == 0) & (x % 2 == 0)] = 0
        ch[(y % 2 == 1) & (x % 2 == 1)] = 2
        return ch


@dataclass(frozen=True)
class Event:
    """A single polarity change at one pixel.

    ``t_prev`` is the timestamp of the previous event at the same pixel, or
    the stream start time if this is the pixel's first event.
    """

    x: int
    y: int
    p: int
    t_prev: float
    t_curr: float


class EventStream:
    """A time-ordered collection of events over one sensor.

    Stored as parallel arrays; the construction order is preserved so that
    validation can report ordering problems in hand-built streams.  Streams
    produced by the simulator or file decoder are in canonical order
    (ascending ``t_curr``, ties by pixel index).
    """

    def __init__(self, geometry: SensorGeometry, x, y, p, t_prev, t_curr,
                 t_start: float, t_end: float):
        self.geometry = geometry
        self.x = np.asarray(x, dtype=np.int64)
        self.y = np.asarray(y, dtype=np.int64)
        self.p = np.asarray(p, dtype=np.int64)
        self.t_prev = np.asarray(t_prev, dtype=np.float64)
        self.t_curr = np.asarray(t_curr, dtype=np.float64)
        self.t_start = float(t_start)
        self.t_end = float(t_end)
        n = len(self.x)
        for arr in (self.y, self.p, self.t_prev, self.t_curr):
            if len(arr) != n:
                raise ValueError("event arrays must have equal length")

    @classmethod
    def from_events(cls, geometry, events, t_start, t_end):
        ev = list(events)
        return cls(
            geometry,
            [e.x for e in ev], [e.y for e in ev], [e.p for e in ev],
            [e.t_prev for e in ev], [e.t_curr for e in ev],
            t_start, t_end,
        )

    def __len__(self):
        return len(self.x)

    def __getitem__(self, i) -> Event:
        return Event(int(self.x[i]), int(self.y[i]), int(self.p[i]),
                     float(self.t_prev[i]), float(self.t_curr[i]))

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    def pixel_index(self):
        return self.geometry.pixel_index(self.x, self.y)

    def channel(self):
        return self.geometry.channel_of(self.x, self.y)

    def pair_intervals(self):
        """t_curr - t_prev restricted to genuine event pairs.

        A pixel's first event (t_prev equal to the stream start) has no
        predecessor event, so its gap is bookkeeping, not an interval.
        """
        d = self.t_curr - self.t_prev
        return d[self.t_prev != self.t_start]


@dataclass(frozen=True)
class Violation:
    kind: str        # "bounds", "polarity", "span", "linkage", "monotone"
    index: int
    message: str


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __len__(self):
        return len(self.violations)

    def counts(self) -> dict:
        out: dict = {}
        for v in self.violations:
            out[v.kind] = out.get(v.kind, 0) + 1
        return out


def _stream_is_valid(stream: EventStream) -> bool:
    """Vectorised all-or-nothing version of validate_stream."""
    g = stream.geometry
    if len(stream) == 0:
        return True
    ok = (
        np.all((stream.x >= 0) & (stream.x < g.width))
        and np.all((stream.y >= 0) & (stream.y < g.height))
        and np.all(np.abs(stream.p) == 1)
        and np.all((stream.t_curr > stream.t_start) & (stream.t_curr <= stream.t_end))
    )
    if not ok:
        return False
    idx = stream.pixel_index()
    order = np.argsort(idx, kind="stable")
    idx_s = idx[order]
    tp_s = stream.t_prev[order]
    tc_s = stream.t_curr[order]
    first = np.empty(len(idx_s), dtype=bool)
    first[0] = True
    first[1:] = idx_s[1:] != idx_s[:-1]
    expected = np.empty_like(tp_s)
    expected[first] = stream.t_start
    expected[~first] = tc_s[np.flatnonzero(~first) - 1]
    return bool(np.all(tp_s == expected) and np.all(tc_s > tp_s))


def validate_stream(stream: EventStream) -> ValidationReport:
    """Check a stream against the event-model invariants.

    Violations are data, not errors: the report lists out-of-bounds pixels,
    bad polarities, timestamps outside (t_start, t_end], broken t_prev
    linkage and non-increasing per-pixel timestamps.  An empty report means
    the stream is a valid observation set.
    """
    report = ValidationReport()
    if _stream_is_valid(stream):
        return report
    g = stream.geometry
    last_seen: dict = {}
    for i in range(len(stream)):
        x, y, p = int(stream.x[i]), int(stream.y[i]), int(stream.p[i])
        tp, tc = float(stream.t_prev[i]), float(stream.t_curr[i])
        if not (0 <= x < g.width and 0 <= y < g.height):
            report.violations.append(Violation("bounds", i, f"pixel ({x},{y}) outside {g.width}x{g.height}"))
            continue
        if p not in (-1, 1):
            report.violations.append(Violation("polarity", i, f"polarity {p} not in {{-1,+1}}"))
        if not (stream.t_start < tc <= stream.t_end):
            report.violations.append(Violation("span", i, f"t_curr {tc} outside ({stream.t_start}, {stream.t_end}]"))
        key = (x, y)
        expected = last_seen.get(key, stream.t_start)
        if tp != expected:
            report.violations.append(Violation("linkage", i, f"t_prev {tp} != expected {expected} at pixel {key}"))
        elif tc <= tp:
            report.violations.append(Violation("monotone", i, f"t_curr {tc} <= t_prev {tp} at pixel {key}"))
        last_seen[key] = tc
    return report


def derive_t_ref(event: Event, tau: float) -> float:
    """Reference timestamp for an event: previous timestamp plus dead time.

    Raises RefractoryExceedsInterval when the reference would not precede the
    event itself, i.e. the refractory hypothesis is inconsistent with the
    observed interval.
    """
    if tau < 0:
        raise ValueError("refractory period must be >= 0")
    t_ref = event.t_prev + tau
    if t_ref >= event.t_curr:
        raise RefractoryExceedsInterval(
            f"t_prev + tau = {t_ref} >= t_curr = {event.t_curr}")
    return t_ref


def reference_times(t_prev, t_curr, tau: float, t_start: float):
    """Vectorised reference timestamps for a batch of events.

    A pixel's first event (t_prev == t_start) keeps its reference at the
    stream start: the sensor establishes a fresh reference when recording
    begins, and the refractory offset only applies after an observed event.
    Raises RefractoryExceedsInterval if any non-first event cannot
    accommodate ``tau``.
    """
    t_prev = np.asarray(t_prev, dtype=np.float64)
    t_curr = np.asarray(t_curr, dtype=np.float64)
    first = t_prev == t_start
    t_ref = np.where(first, t_prev, t_prev + tau)
    if np.any(t_ref >= t_curr):
        raise RefractoryExceedsInterval(
            f"tau = {tau} does not fit inside the smallest event interval")
    return t_ref


@dataclass(frozen=True)
class StreamStats:
    count: int
    mean_interval: float          # mean per-pixel inter-event interval (NaN if no pairs)
    min_interval: float           # smallest per-pixel inter-event interval (NaN if no pairs)
    equivalent_views: float       # memory-equivalent number of reference images
    sparsity: float | None = None  # |reference| / |stream| when a reference is given
    duration: float = 0.0


def stream_stats(stream: EventStream, reference: EventStream | None = None) -> StreamStats:
    """Event count, interval statistics and memory-equivalence summary.

    ``equivalent_views`` counts how many full images occupy the same memory
    as the stream, at 47 bits per event and 8 bits per image pixel channel.
    With ``reference`` (same geometry) the sparsity ratio |ref| / |stream|
    is included.
    """
    if reference is not None and reference.geometry != stream.geometry:
        raise GeometryMismatch(
            f"{reference.geometry} != {stream.geometry}")
    g = stream.geometry
    intervals = stream.pair_intervals()
    mean_iv = float(np.mean(intervals)) if intervals.size else float("nan")
    min_iv = float(np.min(intervals)) if intervals.size else float("nan")
    bits_per_view = g.width * g.height * g.channels * IMAGE_BITS_PER_VALUE
    views = len(stream) * EVENT_BITS / bits_per_view
    sparsity = None
    if reference is not None:
        sparsity = len(reference) / len(stream) if len(stream) else float("inf")
    return StreamStats(
        count=len(stream),
        mean_interval=mean_iv,
        min_interval=min_iv,
        equivalent_views=views,
        sparsity=sparsity,
        duration=stream.duration,
    )
