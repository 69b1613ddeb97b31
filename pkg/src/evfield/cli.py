"""Command-line surface: simulate, reconstruct, evaluate, stats.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import errors
from .config import load_config
from .eventfile import read_events, read_poses, write_events, write_poses
from .events import stream_stats
from .fields import PoseLike, TemporalSignalField, load_field, save_field
from .metrics import read_float_map, write_float_map
from .pipeline import (build_camera, evaluate_views, render_view,
                       run_reconstruct, run_simulate)
from .trainer import save_train_state

USAGE_ERROR, DATA_ERROR, NUMERIC_ERROR = 1, 2, 3

_DATA_ERRORS = (errors.BadMagic, errors.FormatError, errors.ConfigError,
                errors.GeometryMismatch, errors.ShapeMismatch,
                errors.ChannelMismatch, errors.InvalidParams,
                errors.RankDeficient, errors.TooSmall, FileNotFoundError,
                ValueError)
_NUMERIC_ERRORS = (errors.DivergedLoss, errors.NonFiniteRadiance,
                   errors.RefractoryExceedsInterval, errors.NoIntervals)


def _print_stats(stats, tau=None):
    print(f"events            {stats.count}")
    print(f"duration          {stats.duration:.6g} s")
    mean = "n/a" if np.isnan(stats.mean_interval) else f"{stats.mean_interval:.6g} s"
    print(f"mean interval     {mean}")
    print(f"equivalent views  {stats.equivalent_views:.4g}")
    if tau is not None and stats.duration > 0:
        print(f"% seq. duration   {100.0 * tau / stats.duration:.4g}")
    if stats.sparsity is not None:
        print(f"sparsity          {stats.sparsity:.4g}x")


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    stream, trajectory, _, _ = run_simulate(cfg)
    write_events(cfg.path("output", "events"), stream)
    write_poses(cfg.path("output", "poses"), trajectory)
    print(f"wrote {cfg.path('output', 'events')}")
    print(f"wrote {cfg.path('output', 'poses')}")
    _print_stats(stream_stats(stream), tau=cfg["sensor"]["refractory"])
    return 0


def cmd_reconstruct(args) -> int:
    cfg = load_config(args.config)
    stream = read_events(args.events)
    from .pipeline import build_trajectory
    trajectory = build_trajectory(cfg)
    state = run_reconstruct(cfg, stream, trajectory)
    save_field(cfg.path("output", "checkpoint"), state.field)
    save_train_state(cfg.path("output", "sidecar"), state)
    with open(cfg.path("output", "trace"), "w") as fh:
        fh.write("# iteration loss ratio tau\n")
        for it, loss, ratio, tau in state.trace:
            fh.write(f"{int(it)} {loss:.10g} {ratio:.10g} {tau:.10g}\n")
    print(f"wrote {cfg.path('output', 'checkpoint')}")
    print(f"wrote {cfg.path('output', 'sidecar')}")
    print(f"wrote {cfg.path('output', 'trace')}")
    if len(state.trace):
        last = state.trace[-1]
        print(f"final loss {last[1]:.6g}  ratio {last[2]:.6g}  tau {last[3]:.6g}")
    return 0


def cmd_evaluate(args) -> int:
    field = load_field(args.checkpoint)
    if isinstance(field, TemporalSignalField):
        raise errors.ConfigError("evaluate renders views; it needs a voxel checkpoint")
    times, positions, quats = read_poses(args.poses)
    refs = [read_float_map(p) for p in args.references]
    if len(refs) != len(times):
        raise errors.ShapeMismatch(
            f"{len(times)} poses but {len(refs)} reference images")
    shape = refs[0].shape
    height, width = shape[0], shape[1]
    from .trajectory import CameraIntrinsics
    camera = CameraIntrinsics.from_fov(width, height, args.fov_x_deg)
    preds = []
    for t, pos, quat in zip(times, positions, quats):
        pose = PoseLike(float(t), pos, quat)
        preds.append(render_view(field, pose, camera, width, height,
                                 n_samples=args.n_samples))
    rows, mean, (a, b) = evaluate_views(preds, refs)
    print(f"gamma-correction  a={np.array2string(a, precision=5)} "
          f"b={np.array2string(b, precision=5)}")
    print(f"{'view':>4}  {'psnr_db':>9}  {'ssim':>7}")
    for i, row in enumerate(rows):
        print(f"{i:>4}  {row.psnr:>9.4f}  {row.ssim:>7.4f}")
    print(f"mean  {mean.psnr:>9.4f}  {mean.ssim:>7.4f}")
    if args.save_views:
        for i, pred in enumerate(preds):
            write_float_map(f"{args.save_views}.{i:03d}.fmap", pred)
    return 0


def cmd_stats(args) -> int:
    stream = read_events(args.events)
    reference = read_events(args.reference) if args.reference else None
    _print_stats(stream_stats(stream, reference), tau=args.tau)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evfield",
        description="Event camera simulation and radiance reconstruction")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate an event stream from a config")
    p.add_argument("config")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reconstruct", help="train a field from an event file")
    p.add_argument("config")
    p.add_argument("events")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("evaluate", help="score a checkpoint against reference views")
    p.add_argument("checkpoint")
    p.add_argument("poses")
    p.add_argument("references", nargs="+", help="reference float-map images")
    p.add_argument("--fov-x-deg", type=float, default=45.0)
    p.add_argument("--n-samples", type=int, default=64)
    p.add_argument("--save-views", default=None,
                   help="prefix for saving predicted views as float maps")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("stats", help="report event file statistics")
    p.add_argument("events")
    p.add_argument("--reference", default=None,
                   help="reference event file for the sparsity ratio")
    p.add_argument("--tau", type=float, default=None,
                   help="refractory period for the %%-of-duration row")
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE_ERROR if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except _NUMERIC_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return NUMERIC_ERROR
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_ERROR


if __name__ == "__main__":
    sys.exit(main())
