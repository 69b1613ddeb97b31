"""Event stream generation from a continuous log-radiance source.

Each pixel realises its contrast thresholds once, sets its reference level
at the stream start and then marches time adaptively.  When the log-radiance
change since the reference first reaches a threshold, the crossing time is
located by bisection (refined by a bracketed secant polish), an event is
emitted, and the pixel stays deactivated for the refractory period; on
reactivation the current log-radiance becomes the new reference.

All pixels march in lockstep so source queries are vectorised; per-pixel
state makes the result independent of chunking, and an explicit ``workers``
argument only splits pixels into independently processed chunks, so output
is bit-identical for any worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import ChannelMismatch, InvalidParams, NonFiniteRadiance
from .events import EventStream, SensorGeometry
from .thresholds import ThresholdMap, ThresholdParams

INIT_STEP_FRAC = 1e-3   # first marching step, as a fraction of the span
MAX_STEP_FRAC = 1e-2    # adaptive doubling stops at this fraction of the span
TIME_TOL = 1e-9         # bisection stops below min(this, 1e-6 * current step)
POLISH_ITERS = 8        # bracketed secant refinements after bisection


def _query(source, x, y, t, ch):
    vals = np.asarray(source.log_radiance(x, y, t, ch), dtype=np.float64)
    if not np.all(np.isfinite(vals)):
        raise NonFiniteRadiance(f"source returned non-finite log-radiance at t={t}")
    return vals


def _simulate_chunk(source, x, y, ch, c_pos, c_neg, tau, t0, t1):
    """March one chunk of pixels; returns (x, y, p, t_prev, t_curr) arrays."""
    n = len(x)
    span = t1 - t0
    t = np.full(n, t0)
    ref = _query(source, x, y, t, ch)
    step = np.full(n, span * INIT_STEP_FRAC)
    max_step = span * MAX_STEP_FRAC
    t_prev = np.full(n, t0)
    active = np.ones(n, dtype=bool)

    out_x, out_y, out_p, out_tp, out_tc = [], [], [], [], []

    while np.any(active):
        ai = np.flatnonzero(active)
        tn = np.minimum(t[ai] + step[ai], t1)
        g = _query(source, x[ai], y[ai], tn, ch[ai]) - ref[ai]
        hit_pos = g >= c_pos[ai]
        hit_neg = g <= -c_neg[ai]
        hit = hit_pos | hit_neg

        # pixels that reached the end without crossing are done
        done = ~hit & (tn >= t1)
        active[ai[done]] = False
        # plain advance: keep the reference, grow the step
        adv = ~hit & ~done
        t[ai[adv]] = tn[adv]
        step[ai[adv]] = np.minimum(step[ai[adv]] * 2.0, max_step)

        if not np.any(hit):
            continue
        hi_idx = ai[hit]                      # global indices of crossing pixels
        lo = t[hi_idx].copy()
        hi = tn[hit].copy()
        g_hi = g[hit].copy()
        ref_h = ref[hi_idx]
        cp = c_pos[hi_idx]
        cn = c_neg[hi_idx]
        xs, ys, chs = x[hi_idx], y[hi_idx], ch[hi_idx]

        # bisection on "change reached either threshold"; taking the earlier
        # true midpoint whenever one is sampled keeps causality on a
        # double crossing inside one step
        tol = np.minimum(TIME_TOL, 1e-6 * step[hi_idx])
        open_ = (hi - lo) > tol
        while np.any(open_):
            oi = np.flatnonzero(open_)
            mid = 0.5 * (lo[oi] + hi[oi])
            gm = _query(source, xs[oi], ys[oi], mid, chs[oi]) - ref_h[oi]
            crossed = (gm >= cp[oi]) | (gm <= -cn[oi])
            hi[oi[crossed]] = mid[crossed]
            g_hi[oi[crossed]] = gm[crossed]
            lo[oi[~crossed]] = mid[~crossed]
            open_ = (hi - lo) > tol

        pol = np.where(g_hi >= cp, 1, -1).astype(np.int64)
        target = np.where(pol > 0, cp, -cn)

        # bracketed secant polish of (change - target) toward machine precision
        fa = _query(source, xs, ys, lo, chs) - ref_h - target
        fb = g_hi - target
        a, b = lo.copy(), hi.copy()
        t_star = hi.copy()
        for _ in range(POLISH_ITERS):
            denom = fb - fa
            safe = np.abs(denom) > 0
            s = np.where(safe, b - fb * (b - a) / np.where(safe, denom, 1.0),
                         0.5 * (a + b))
            s = np.clip(s, np.minimum(a, b), np.maximum(a, b))
            fs = _query(source, xs, ys, s, chs) - ref_h - target
            t_star = np.where(np.abs(fs) <= np.abs(fb), s, t_star)
            move_b = (fs * fb) > 0
            a = np.where(move_b, a, b)
            fa = np.where(move_b, fa, fb)
            b = s
            fb = fs

        out_x.append(xs)
        out_y.append(ys)
        out_p.append(pol)
        out_tp.append(t_prev[hi_idx].copy())
        out_tc.append(t_star.copy())
        t_prev[hi_idx] = t_star

        # halve the step where the crossing badly overshot the threshold
        overshoot = np.abs(g_hi) > 2.0 * np.where(pol > 0, cp, cn)
        step[hi_idx[overshoot]] = np.maximum(
            step[hi_idx[overshoot]] * 0.5, 16.0 * TIME_TOL)

        # refractory: deactivate until t_star + tau, then re-reference
        t_react = t_star + tau
        dead = t_react >= t1
        active[hi_idx[dead]] = False
        live = ~dead
        li = hi_idx[live]
        t[li] = t_react[live]
        ref[li] = _query(source, x[li], y[li], t_react[live], ch[li])

    cat = lambda parts, dtype: (np.concatenate(parts).astype(dtype) if parts
                                else np.empty(0, dtype=dtype))
    return (cat(out_x, np.int64), cat(out_y, np.int64), cat(out_p, np.int64),
            cat(out_tp, np.float64), cat(out_tc, np.float64))


def _run(source, geometry, thresholds, sigma_cp, tau, t0, t1, seed, workers):
    if not t1 > t0:
        raise InvalidParams("need t1 > t0")
    if tau < 0 or sigma_cp < 0:
        raise InvalidParams("tau and sigma must be >= 0")
    tmap = ThresholdMap(geometry.width, geometry.height, thresholds, sigma_cp, seed)
    xs, ys = np.meshgrid(np.arange(geometry.width), np.arange(geometry.height))
    x = xs.ravel().astype(np.int64)
    y = ys.ravel().astype(np.int64)
    ch = geometry.channel_of(x, y)
    pix = geometry.pixel_index(x, y)
    c_pos = tmap.c_pos[pix]
    c_neg = tmap.c_neg[pix]

    n_chunks = max(1, min(int(workers), len(x)))
    chunks = np.array_split(np.arange(len(x)), n_chunks)
    run_one = lambda ci: _simulate_chunk(source, x[ci], y[ci], ch[ci],
                                         c_pos[ci], c_neg[ci], tau, t0, t1)
    if n_chunks == 1:
        parts = [run_one(chunks[0])]
    else:
        with ThreadPoolExecutor(max_workers=n_chunks) as pool:
            parts = list(pool.map(run_one, chunks))

    ex = np.concatenate([p[0] for p in parts])
    ey = np.concatenate([p[1] for p in parts])
    ep = np.concatenate([p[2] for p in parts])
    etp = np.concatenate([p[3] for p in parts])
    etc = np.concatenate([p[4] for p in parts])
    # canonical ordering: time, ties by pixel index
    order = np.lexsort((geometry.pixel_index(ex, ey), etc))
    return EventStream(geometry, ex[order], ey[order], ep[order],
                       etp[order], etc[order], t0, t1), tmap


def simulate(source, geometry: SensorGeometry, thresholds: ThresholdParams,
             sigma_cp: float, tau: float, t0: float, t1: float, seed: int,
             workers: int = 1, return_threshold_map: bool = False):
    """Generate the event stream a sensor would emit watching ``source``.

    Per-pixel realised thresholds are drawn once from
    Normal(nominal, sigma_cp^2) truncated at 1% of the nominal value.  Events
    land in (t0, t1]; crossings at exactly t1 are included.  Identical
    (seed, inputs) give a bit-identical stream for any ``workers`` count.
    """
    stream, tmap = _run(source, geometry, thresholds, sigma_cp, tau, t0, t1,
                        seed, workers)
    return (stream, tmap) if return_threshold_map else stream


def simulate_bayer(source, geometry: SensorGeometry, thresholds: ThresholdParams,
                   sigma_cp: float, tau: float, t0: float, t1: float, seed: int,
                   workers: int = 1, return_threshold_map: bool = False):
    """As simulate, but each pixel observes only its RGGB mosaic channel."""
    if geometry.color_filter != "rggb":
        raise InvalidParams("simulate_bayer needs an RGGB sensor geometry")
    if getattr(source, "channels", 1) < 3:
        raise ChannelMismatch(
            f"Bayer simulation needs a 3-channel source, got {getattr(source, 'channels', 1)}")
    stream, tmap = _run(source, geometry, thresholds, sigma_cp, tau, t0, t1,
                        seed, workers)
    return (stream, tmap) if return_threshold_map else stream
