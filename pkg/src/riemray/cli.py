"""``riemray`` command line: ``render``, ``geodesic`` and ``verify``.

Exit status is 0 on success, 1 for config parse/validation errors, 2 for
numerical failures, 3 for IO errors.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import sys
import time
from pathlib import Path

import numpy as np

from . import verify as verify_mod
from .config import ConfigError, RunConfig, load_config, serialize_config
from .geodesics import GeodesicState, g_norm, trace_geodesic
from .render import build_camera, render

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERIC = 2
EXIT_IO = 3


def _vec3_arg(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    try:
        vec = tuple(float(p) for p in parts)
    except ValueError:
        vec = ()
    if len(vec) != 3 or not all(np.isfinite(vec)):
        raise argparse.ArgumentTypeError(f"expected x,y,z with finite numbers, got {text!r}")
    return vec


def _size_arg(text: str) -> tuple[int, int]:
    try:
        w, h = (int(p) for p in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}") from None
    if w < 1 or h < 1:
        raise argparse.ArgumentTypeError(f"size must be positive, got {text!r}")
    return w, h


def _positive_float(text: str) -> float:
    value = float(text)
    if not (np.isfinite(value) and value > 0):
        raise argparse.ArgumentTypeError(f"must be a positive number, got {text!r}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="riemray", description="Geodesic ray tracing in Riemannian 3-spaces.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_render = sub.add_parser("render", help="render a scene to a PPM or PNG image")
    p_render.add_argument("config", type=Path)
    p_render.add_argument("-o", "--output", type=Path, help="image path (overrides output.path)")
    p_render.add_argument("--h", type=_positive_float, help="integrator step (overrides integrator.h)")
    p_render.add_argument("--size", type=_size_arg, metavar="WxH", help="resolution (overrides output size)")
    p_render.add_argument("--workers", type=int, default=1, help="render threads (output is identical for any value)")
    p_render.add_argument("--print-config", action="store_true", help="print the effective config and exit")

    p_geo = sub.add_parser("geodesic", help="export one geodesic polyline as CSV")
    p_geo.add_argument("config", type=Path)
    p_geo.add_argument("--start", type=_vec3_arg, required=True, metavar="x,y,z")
    p_geo.add_argument("--dir", type=_vec3_arg, required=True, metavar="x,y,z")
    p_geo.add_argument("-o", "--output", type=Path, default=Path("geodesic.csv"))
    p_geo.add_argument("--h", type=_positive_float, help="integrator step (overrides integrator.h)")
    p_geo.add_argument("--print-config", action="store_true", help="print the effective config and exit")

    p_ver = sub.add_parser("verify", help="run the numerical self-checks")
    p_ver.add_argument("--seed", type=int, default=42)
    return parser


def _effective_config(args) -> RunConfig:
    cfg = load_config(args.config)
    if getattr(args, "h", None) is not None:
        cfg = dataclasses.replace(cfg, integrator=dataclasses.replace(cfg.integrator, h=args.h))
    out = cfg.output
    if getattr(args, "size", None) is not None:
        out = dataclasses.replace(out, width=args.size[0], height=args.size[1])
    if args.command == "render" and args.output is not None:
        fmt = "png" if args.output.suffix.lower() == ".png" else out.format
        out = dataclasses.replace(out, path=str(args.output), format=fmt)
    return dataclasses.replace(cfg, output=out)


def report_text(cfg: RunConfig, result, wall: float) -> str:
    lines = [
        f"wall_time_s = {wall:.3f}",
        f"rays = {result.rays}",
        f"mean_steps_per_ray = {result.mean_steps:.2f}",
        f"pixel_errors = {result.errors}",
        "",
        "# effective config",
        serialize_config(cfg),
    ]
    return "\n".join(lines)


def cmd_render(cfg: RunConfig, workers: int = 1) -> int:
    t0 = time.perf_counter()
    cam = build_camera(cfg.metric, cfg.camera.position, cfg.camera.look, cfg.camera.up, cfg.camera.fov)
    result = render(cfg.metric, cfg.scene, cam, cfg.integrator, cfg.output.width, cfg.output.height, workers=workers)
    wall = time.perf_counter() - t0
    path = Path(cfg.output.path)
    try:
        result.image.save(path, cfg.output.format)
        path.with_name(path.name + ".report.txt").write_text(report_text(cfg, result, wall), encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {path} ({result.rays} rays, {result.mean_steps:.1f} mean steps, "
          f"{result.errors} pixel errors, {wall:.2f} s)")
    return EXIT_OK


def cmd_geodesic(cfg: RunConfig, start, direction, output: Path) -> int:
    start = np.asarray(start, dtype=float)
    direction = np.asarray(direction, dtype=float)
    norm = float(g_norm(cfg.metric, start, direction))
    if norm == 0.0:
        print("warning: zero direction, writing the start point only", file=sys.stderr)
        rows = [[0.0, *start, *direction]]
    else:
        poly = trace_geodesic(cfg.metric, GeodesicState(start, direction / norm), cfg.integrator, cfg.scene.bounds)
        if poly.failed_at is not None:
            print(f"warning: metric evaluation failed at step {poly.failed_at}; polyline truncated", file=sys.stderr)
        rows = [[t, *x, *v] for t, x, v in zip(poly.t, poly.positions, poly.velocities)]
    try:
        with open(output, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "x", "y", "z", "vx", "vy", "vz"])
            writer.writerows([[repr(float(v)) for v in row] for row in rows])
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {output} ({len(rows)} states)")
    return EXIT_OK


def cmd_verify(seed: int) -> int:
    results = verify_mod.run_all(seed)
    print(verify_mod.format_table(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERIC


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "verify":
        return cmd_verify(args.seed)
    try:
        cfg = _effective_config(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    if args.print_config:
        print(serialize_config(cfg), end="")
        return EXIT_OK
    try:
        if args.command == "render":
            return cmd_render(cfg, workers=args.workers)
        return cmd_geodesic(cfg, args.start, args.dir, args.output)
    except ArithmeticError as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
