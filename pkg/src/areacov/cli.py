"""Command-line entry point: ``areacov plan|decompose|route|convert-dataset|batch``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .errors import (
    AreaCoverageError,
    DisconnectedInstance,
    FormatError,
    GeometryError,
    Infeasible,
    InvalidDepot,
    InvalidParameter,
    IoError,
)
from .formats import DATASET_KINDS, convert_dataset, load_environment, parse_capacity
from .graph import CoverageGraph
from .mem import mem_solve
from .output import emit_geojson, emit_svg
from .pipeline import PlanConfig, run
from .decomposition import decompose

EXIT_OK, EXIT_CONFIG, EXIT_GEOMETRY, EXIT_INFEASIBLE, EXIT_IO = 0, 2, 3, 4, 5

log = logging.getLogger("areacov")


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, (Infeasible, DisconnectedInstance)):
        return EXIT_INFEASIBLE
    if isinstance(exc, (GeometryError, InvalidDepot)):
        return EXIT_GEOMETRY
    if isinstance(exc, (FormatError, IoError, OSError)):
        return EXIT_IO
    if isinstance(exc, InvalidParameter):
        return EXIT_CONFIG
    return 1


def _point(text: str) -> tuple:
    try:
        x, y = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected X,Y, got {text!r}") from None
    return x, y


def _capacity(text: str) -> float:
    try:
        return parse_capacity(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or 'inf', got {text!r}") from None


def _add_plan_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with PlanConfig fields; flags override it")
    p.add_argument("--env", help="environment file (native JSON or GeoJSON)")
    p.add_argument("--depot", type=_point, help="depot as X,Y (default: first outer vertex)")
    p.add_argument("--capacity", type=_capacity, help="route capacity Q, or 'inf'")
    p.add_argument("--fov", type=float, help="field-of-view width f")
    p.add_argument("--cost", choices=("length", "ramp", "wind"))
    p.add_argument("--vmax", type=float)
    p.add_argument("--amax", type=float)
    p.add_argument("--service-speed", dest="service_speed", type=float)
    p.add_argument("--deadhead-speed", dest="deadhead_speed", type=float)
    p.add_argument("--wind-speed", dest="wind_speed", type=float)
    p.add_argument("--wind-from", dest="wind_from", type=float, help="compass bearing the wind blows from, degrees")
    p.add_argument("--fly-over-holes", dest="fly_over_holes", action="store_const", const=True)
    p.add_argument("--include-boundary", dest="include_boundary", action="store_const", const=True)
    p.add_argument("--out", help="routes GeoJSON")
    p.add_argument("--svg", help="SVG drawing")
    p.add_argument("--report", help="JSON report")
    p.add_argument("--no-timings", dest="timings", action="store_const", const=False,
                   help="leave stage timings out of the report")
    p.add_argument("--seed", type=int)
    p.add_argument("--coverage-samples", dest="coverage_samples", type=int)


def config_from_args(args) -> PlanConfig:
    data = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise FormatError(f"{args.config}: cannot read ({exc.strerror or exc})") from exc
        except json.JSONDecodeError as exc:
            raise FormatError(f"{args.config}: line {exc.lineno}: {exc.msg}") from exc
    for name in (
        "env", "depot", "capacity", "fov", "cost", "vmax", "amax", "service_speed", "deadhead_speed",
        "wind_speed", "wind_from", "fly_over_holes", "include_boundary", "out", "svg", "report",
        "timings", "seed", "coverage_samples",
    ):
        v = getattr(args, name, None)
        if v is not None:
            data[name] = v
    if not data.get("env"):
        raise InvalidParameter("--env is required")
    return PlanConfig.from_dict(data)


def cmd_plan(args) -> int:
    cfg = config_from_args(args)
    res = run(cfg)
    if not cfg.report:
        sys.stdout.write(res.report.to_json(cfg.timings))
    return EXIT_OK


def cmd_decompose(args) -> int:
    env = load_environment(args.env)
    stages = decompose(env)
    out = {
        "cells": [
            {"outer": [list(p) for p in c.shape.outer], "holes": [[list(p) for p in h] for h in c.shape.holes],
             "service_direction": c.service_direction, "msa": c.msa}
            for c in stages.cells
        ],
        "msa": {"initial": stages.initial.total_msa, "split": sum(c.msa for c in stages.split),
                "merged": sum(c.msa for c in stages.merged)},
    }
    text = json.dumps(out, indent=1) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if args.svg:
        emit_svg(env, stages.cells, (), None, args.svg)
    return EXIT_OK


def cmd_route(args) -> int:
    g = CoverageGraph.load(args.instance)
    if args.capacity is not None:
        g.capacity = args.capacity
    sol = mem_solve(g)
    text = json.dumps(sol.to_dict(g), indent=1) + "\n"
    if args.solution:
        Path(args.solution).write_text(text)
    else:
        sys.stdout.write(text)
    if args.out:
        emit_geojson(sol, args.out, g.points)
    return EXIT_OK


def cmd_convert(args) -> int:
    results = convert_dataset(args.path, args.kind, args.out_dir)
    for env_path, _ in results:
        print(env_path)
    return EXIT_OK


def _plan_file(path: str) -> tuple:
    try:
        cfg = PlanConfig.from_dict(json.loads(Path(path).read_text()))
        res = run(cfg)
        return path, EXIT_OK, res.report.totals
    except (AreaCoverageError, OSError, json.JSONDecodeError) as exc:
        return path, exit_code(exc), str(exc)


def cmd_batch(args) -> int:
    worst = EXIT_OK
    with ProcessPoolExecutor(max_workers=args.workers) as pool:
        for path, code, info in pool.map(_plan_file, args.configs):
            print(json.dumps({"config": path, "exit": code, "result": info}, sort_keys=True))
            worst = max(worst, code)
    return worst


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="areacov", description="Area coverage planning with line-coverage routing.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="full pipeline: cells, tracks, graph, routes")
    _add_plan_args(p)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("decompose", help="cell decomposition only")
    p.add_argument("--env", required=True)
    p.add_argument("--out", help="cells JSON (default: stdout)")
    p.add_argument("--svg")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("route", help="solve a serialized line-coverage instance")
    p.add_argument("instance")
    p.add_argument("--capacity", type=_capacity)
    p.add_argument("--solution", help="solution JSON (default: stdout)")
    p.add_argument("--out", help="routes GeoJSON")
    p.set_defaults(func=cmd_route)

    p = sub.add_parser("convert-dataset", help="convert a downloaded dataset to native JSON")
    p.add_argument("path")
    p.add_argument("--kind", choices=DATASET_KINDS, required=True)
    p.add_argument("--out-dir", dest="out_dir")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("batch", help="run several plan configs in a worker pool")
    p.add_argument("configs", nargs="+")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_batch)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (AreaCoverageError, OSError) as exc:
        stage = getattr(exc, "stage", None)
        prefix = f"[{stage}] " if stage else ""
        print(f"error: {prefix}{type(exc).__name__}: {exc}", file=sys.stderr)
        return exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
