"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""
import json
import math
import os
import time
from collections import Counter
from pathlib import Path

import numpy as np
import pytest
import shapely

from areacov.cli import main
from areacov.costs import RampParams, ramp_time
from areacov.decomposition import decompose
from areacov.formats import convert_dataset, save_environment
from areacov.graph import shortest_deadheads, visibility_edges
from areacov.mem import brute_force_oracle, init_routes, mem_solve
from areacov.pipeline import PlanConfig, run
from areacov.tracks import boustrophedon_tracks, coverage_fraction, generate_all_tracks
from envs import indoor, random_polygon, rectilinear_random, regression_suite, scenario1_env, scenario2_env
from instances import random_instance

INDOOR_TABLE = {  # capacity fraction -> (length m, turns)
    math.inf: (14781, 10183),
    0.75: (14793, 10191),
    0.50: (14823, 10211),
    0.30: (14939, 10274),
    0.25: (15030, 10308),
}
OUTDOOR_TOTAL_TIME = 512619


@pytest.fixture
def verdict(capsys):
    def emit(number: int, title: str, ok: bool, detail: str = "") -> None:
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}" + (f" ({detail})" if detail else ""))
        assert ok, f"criterion {number} failed: {detail}"

    return emit


def test_criterion_1_ramp_formula(verdict):
    p = RampParams(3.0, 1.0)
    got = [ramp_time(d, p) for d in (1.0, 9.0, 30.0)]
    vals_ok = all(abs(g - w) <= 1e-9 for g, w in zip(got, (2.0, 6.0, 13.0)))
    d_a = p.d_a
    jump = abs(math.sqrt(4 * d_a / p.a_max) - (p.v_max / p.a_max + d_a / p.v_max))
    side = abs(ramp_time(d_a * (1 - 1e-12), p) - ramp_time(d_a, p))
    verdict(1, "ramp travel time", vals_ok and jump <= 1e-9 and side <= 1e-9,
            f"t={got}, branch gap at d_a={jump:.1e}")


def test_criterion_2_coverage_completeness(verdict):
    t0 = time.perf_counter()
    suite = regression_suite()
    low = {}
    for name, (env, fov) in suite.items():
        tracks = generate_all_tracks(decompose(env).cells, fov)
        c = coverage_fraction(env, tracks, fov, samples=100_000, seed=0)
        if c < 0.999:
            low[name] = c
    naive = {}
    for name, env in (("scenario1", scenario1_env()), ("scenario2", scenario2_env())):
        naive[name] = coverage_fraction(env, boustrophedon_tracks(env, 0.0, 1.0), 1.0, samples=100_000, seed=0)
    elapsed = time.perf_counter() - t0
    ok = len(suite) >= 20 and not low and all(v < 0.999 for v in naive.values()) and elapsed < 60
    verdict(2, "coverage completeness", ok,
            f"{len(suite)} envs, below 0.999: {low or 'none'}, naive {naive}, {elapsed:.1f}s")


def test_criterion_3_msa_monotonicity(verdict):
    rng = np.random.default_rng(2024)
    failures = []
    for k in range(100):
        env = random_polygon(rng, int(rng.integers(10, 61)), int(rng.integers(0, 4)))
        s = decompose(env)
        a = env.area
        for stage, cells in (("initial", s.initial.cells), ("split", s.split), ("merged", s.merged)):
            if abs(sum(c.shape.area for c in cells) - a) > 1e-6 * a:
                failures.append((k, f"area {stage}"))
        if sum(c.msa for c in s.split) > s.initial.total_msa + 1e-9:
            failures.append((k, "msa"))
        split_len = sum(t.length for t in generate_all_tracks(s.split, 1.0))
        merged_len = sum(t.length for t in generate_all_tracks(s.merged, 1.0))
        if merged_len > split_len + 1e-9:
            failures.append((k, "track length"))
    verdict(3, "decomposition stage monotonicity", not failures, f"100 polygons, failures: {failures[:5] or 'none'}")


def test_criterion_4_routing_correctness(verdict):
    rng = np.random.default_rng(4)
    t0 = time.perf_counter()
    problems = []
    ratios = []
    for k in range(200):
        m = int(rng.integers(1, 6))
        asym = bool(k % 2)
        finite = bool((k // 2) % 2)
        g = random_instance(rng, m, asym, finite)
        table = shortest_deadheads(g)
        init = sum(r.total_cost for r in init_routes(g, table))
        sol = mem_solve(g, table=table)
        opt = brute_force_oracle(g, table=table).total_cost
        tol = 1e-9 * max(init, 1.0)
        if Counter(sol.serviced_edges()) != Counter(e.id for e in g.required):
            problems.append((k, "service count"))
        if any(d > g.capacity for d in sol.route_demands):
            problems.append((k, "capacity"))
        if not (opt <= sol.total_cost + tol and sol.total_cost <= init + tol):
            problems.append((k, "bounds", opt, sol.total_cost, init))
        h = sol.cost_history
        if any(b >= a for a, b in zip(h, h[1:])):
            problems.append((k, "non-decreasing merge"))
        if not asym:
            ratios.append(sol.total_cost / opt if opt > 0 else 1.0)
    elapsed = time.perf_counter() - t0
    within = float(np.mean(np.array(ratios) <= 1.3))
    ok = not problems and elapsed < 120 and within >= 0.9
    verdict(4, "routing vs exhaustive oracle", ok,
            f"200 instances, problems: {problems[:3] or 'none'}, symmetric within 1.3x: {within:.1%}, {elapsed:.1f}s")


def _brute_visibility(env, pts, fly):
    region = shapely.Polygon(env.outer) if fly else env.to_shapely()
    region = region.buffer(1e-9)
    shapely.prepare(region)
    n = len(pts)
    return {(i, j) for i in range(n) for j in range(i + 1, n)
            if region.covers(shapely.LineString([pts[i], pts[j]]))}


def test_criterion_5_visibility_equivalence(verdict):
    rng = np.random.default_rng(5)
    envs = []
    while len(envs) < 35:
        holes = int(rng.integers(0, 4))
        env = random_polygon(rng, int(rng.integers(8, 45)), holes)
        if env.n_vertices <= 60:
            envs.append(env)
    while len(envs) < 50:
        env = rectilinear_random(rng, int(rng.integers(3, 8)))
        if env.n_vertices <= 60:
            envs.append(env)
    mismatches = []
    for k, env in enumerate(envs):
        for fly in (False, True):
            got = set(visibility_edges(env, env.vertices, fly))
            want = _brute_visibility(env, env.vertices, fly)
            if got != want:
                mismatches.append((k, fly, len(got ^ want)))
    verdict(5, "visibility graph vs brute force", not mismatches,
            f"50 envs x 2 settings, mismatches: {mismatches[:5] or 'none'}")


def _best_time(fn, repeats=3):
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def test_criterion_6_scaling(verdict):
    times = {}
    for m in (100, 200, 400):
        g = random_instance(np.random.default_rng(m), m)
        table = shortest_deadheads(g)
        times[m] = _best_time(lambda: mem_solve(g, table=table))
    r1, r2 = times[200] / times[100], times[400] / times[200]
    env = indoor(14, 9)
    t0 = time.perf_counter()
    run(PlanConfig(fov=1.0, coverage_samples=0), env=env)
    pipeline = time.perf_counter() - t0
    ok = r1 <= 4.5 and r2 <= 4.5 and pipeline < 5.0
    verdict(6, "scaling tripwires", ok,
            f"MEM {', '.join(f'm={m}: {t:.2f}s' for m, t in times.items())}, ratios {r1:.2f}/{r2:.2f}; "
            f"{env.n_vertices}-vertex pipeline {pipeline:.2f}s")


def _dataset_totals(path, kind, out_dir, fraction=math.inf):
    length = turns = cost = 0.0
    for env_path, cfg in convert_dataset(path, kind, out_dir):
        cfg = {k: v for k, v in cfg.items() if k != "capacities"}
        cfg["coverage_samples"] = 0
        base = run(PlanConfig.from_dict(cfg))
        if not math.isinf(fraction):
            cfg["capacity"] = fraction * base.report.totals["cost"]
            base = run(PlanConfig.from_dict(cfg))
        length += base.report.totals["length"]
        turns += base.report.totals["turns"]
        cost += base.report.totals["cost"]
    return length, turns, cost


def test_criterion_7_published_datasets(verdict, tmp_path, capsys):
    indoor_dir = os.environ.get("AREACOV_INDOOR25")
    outdoor_dir = os.environ.get("AREACOV_OUTDOOR300")
    if not indoor_dir and not outdoor_dir:
        with capsys.disabled():
            print("\n[SKIP] criterion 7: published datasets "
                  "(set AREACOV_INDOOR25 and/or AREACOV_OUTDOOR300 to the downloaded files)")
        pytest.skip("dataset paths not configured")
    notes, ok = [], True
    if indoor_dir:
        for frac, (l_ref, eta_ref) in INDOOR_TABLE.items():
            l, eta, _ = _dataset_totals(indoor_dir, "indoor25", tmp_path / "indoor", frac)
            good = abs(l - l_ref) <= 0.1 * l_ref and abs(eta - eta_ref) <= 0.1 * eta_ref
            ok &= good
            notes.append(f"Q={frac}: l={l:.0f} eta={eta:.0f}")
    if outdoor_dir:
        _, _, t = _dataset_totals(outdoor_dir, "outdoor300", tmp_path / "outdoor")
        ok &= abs(t - OUTDOOR_TOTAL_TIME) <= 0.1 * OUTDOOR_TOTAL_TIME
        notes.append(f"outdoor time={t:.0f}s")
    verdict(7, "published dataset totals", ok, "; ".join(notes))


def test_criterion_8_determinism(verdict, tmp_path):
    env_path = tmp_path / "floor.json"
    save_environment(indoor(4, 2), env_path)
    args = ["plan", "--env", str(env_path), "--fov", "0.7", "--cost", "wind", "--service-speed", "3.33",
            "--deadhead-speed", "5", "--wind-speed", "1.39", "--wind-from", "225", "--capacity", "150",
            "--include-boundary", "--no-timings"]
    outputs = []
    for k in range(2):
        rep, geo = tmp_path / f"rep{k}.json", tmp_path / f"routes{k}.geojson"
        code = main(args + ["--report", str(rep), "--out", str(geo)])
        outputs.append((code, rep.read_bytes(), geo.read_bytes()))
    (c0, r0, g0), (c1, r1, g1) = outputs
    routes = json.loads(r0)["totals"]["routes"]
    verdict(8, "byte-identical reports", c0 == c1 == 0 and r0 == r1 and g0 == g1,
            f"{len(r0)} report bytes, {routes} routes")
