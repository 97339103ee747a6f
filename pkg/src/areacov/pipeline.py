"""End-to-end planning: decompose, generate tracks, build the graph, route."""
from __future__ import annotations

import json
import math
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .costs import CostModel, WindParams
from .decomposition import decompose
from .errors import AreaCoverageError, InvalidParameter, IoError
from .formats import load_environment, parse_capacity
from .geometry import PolygonWithHoles
from .graph import build_graph, shortest_deadheads
from .mem import count_route_turns, mem_solve
from .output import emit_geojson, emit_svg
from .tracks import coverage_fraction, generate_all_tracks

COST_KINDS = ("length", "ramp", "wind")
STAGES = ("load", "decomposition", "tracks", "graph", "routing", "output")


@dataclass
class PlanConfig:
    env: str | None = None
    depot: tuple | None = None  # defaults to the first outer vertex
    capacity: float = math.inf
    fov: float = 1.0
    cost: str = "length"
    vmax: float = 3.0
    amax: float = 1.0
    service_speed: float = 1.0
    deadhead_speed: float = 1.0
    wind_speed: float = 0.0
    wind_from: float = 0.0
    fly_over_holes: bool = False
    include_boundary: bool = False
    out: str | None = None
    svg: str | None = None
    report: str | None = None
    seed: int = 0
    coverage_samples: int = 20_000
    timings: bool = True

    def __post_init__(self):
        self.capacity = parse_capacity(self.capacity)
        if self.depot is not None:
            self.depot = (float(self.depot[0]), float(self.depot[1]))
        self.validate()

    def validate(self) -> None:
        if not self.fov > 0:
            raise InvalidParameter(f"fov must be positive, got {self.fov}")
        if not self.capacity > 0:
            raise InvalidParameter(f"capacity must be positive or inf, got {self.capacity}")
        if self.cost not in COST_KINDS:
            raise InvalidParameter(f"cost must be one of {COST_KINDS}, got {self.cost!r}")
        if self.coverage_samples < 0:
            raise InvalidParameter("coverage_samples must be non-negative")

    @classmethod
    def from_dict(cls, data: dict) -> "PlanConfig":
        known = {f.name for f in fields(cls)}
        extra = sorted(set(data) - known - {"capacities"})
        if extra:
            raise InvalidParameter(f"unknown config keys: {', '.join(extra)}")
        return cls(**{k: v for k, v in data.items() if k in known})

    def cost_model(self) -> CostModel:
        if self.cost == "length":
            return CostModel.length()
        if self.cost == "ramp":
            return CostModel.ramp(self.vmax, self.amax)
        return CostModel.wind_speeds(self.service_speed, self.deadhead_speed, WindParams(self.wind_speed, self.wind_from))


@dataclass
class PlanReport:
    routes: list = field(default_factory=list)
    totals: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)
    msa: dict = field(default_factory=dict)
    coverage: float | None = None
    timings: dict = field(default_factory=dict)

    def to_dict(self, include_timings: bool = True) -> dict:
        d = asdict(self)
        if not include_timings:
            d.pop("timings")
        return d

    def to_json(self, include_timings: bool = True) -> str:
        return json.dumps(self.to_dict(include_timings), indent=1, sort_keys=True) + "\n"


@dataclass
class PlanResult:
    env: PolygonWithHoles
    stages: object
    tracks: list
    graph: object
    solution: object
    report: PlanReport


@contextmanager
def _stage(name: str, timings: dict):
    t0 = time.perf_counter()
    try:
        yield
    except AreaCoverageError as exc:
        if exc.stage is None:
            exc.stage = name
        raise
    finally:
        timings[name] = time.perf_counter() - t0


def route_length(route, points) -> float:
    pts = np.asarray(points, dtype=float)
    return math.fsum(float(np.hypot(*(pts[s.v] - pts[s.u]))) for s in route.steps)


def write_report(report: PlanReport, path, include_timings: bool = True) -> None:
    try:
        Path(path).write_text(report.to_json(include_timings))
    except OSError as exc:
        err = IoError(f"{path}: cannot write ({exc.strerror or exc})")
        err.stage = "output"
        raise err from exc


def run(config: PlanConfig, env: PolygonWithHoles | None = None) -> PlanResult:
    timings: dict = {}
    t_start = time.perf_counter()
    with _stage("load", timings):
        if env is None:
            if config.env is None:
                raise InvalidParameter("no environment given")
            env = load_environment(config.env)
        depot = config.depot if config.depot is not None else env.outer[0]
        model = config.cost_model()
    with _stage("decomposition", timings):
        stages = decompose(env)
    with _stage("tracks", timings):
        tracks = generate_all_tracks(stages.cells, config.fov, env, config.include_boundary)
    with _stage("graph", timings):
        g = build_graph(env, tracks, depot, model, config.capacity, config.fly_over_holes)
        table = shortest_deadheads(g)
    with _stage("routing", timings):
        sol = mem_solve(g, table=table)

    routes, lengths = [], []
    for k, r in enumerate(sol.routes):
        length = route_length(r, g.points)
        lengths.append(length)
        routes.append({"route_id": k, "cost": r.total_cost, "demand": r.total_demand,
                       "length": length, "turns": count_route_turns(r, g.points)})
    report = PlanReport(
        routes=routes,
        totals={
            "length": math.fsum(lengths),
            "turns": sol.turns,
            "cost": sol.total_cost,
            "demand": sol.total_demand,
            "routes": len(sol.routes),
        },
        counts={
            "cells": len(stages.cells),
            "tracks": len(tracks),
            "vertices": g.n_vertices,
            "required_edges": len(g.required),
            "non_required_edges": len(g.deadhead),
        },
        msa={
            "initial": stages.initial.total_msa,
            "split": math.fsum(c.msa for c in stages.split),
            "merged": math.fsum(c.msa for c in stages.merged),
        },
    )
    if config.coverage_samples:
        report.coverage = coverage_fraction(env, [tracks[k] for k in g.track_of], config.fov,
                                            config.coverage_samples, config.seed)
    with _stage("output", timings):
        if config.out:
            emit_geojson(sol, config.out, g.points)
        if config.svg:
            emit_svg(env, stages.cells, tracks, sol, config.svg, g.points)
    timings["total"] = time.perf_counter() - t_start
    report.timings = timings
    if config.report:
        write_report(report, config.report, config.timings)
    return PlanResult(env, stages, tracks, g, sol, report)


def plan(config: PlanConfig, env: PolygonWithHoles | None = None) -> tuple:
    """Run the whole pipeline; returns ``(solution, report)``."""
    res = run(config, env)
    return res.solution, res.report
