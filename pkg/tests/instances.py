"""Random line-coverage instances for solver tests."""
from __future__ import annotations

import math

import numpy as np

from areacov.costs import DEADHEAD, SERVICE, CostModel, WindParams
from areacov.graph import CoverageGraph, Edge, shortest_deadheads
from areacov.mem import init_routes


def complete_instance(points, required_pairs, model: CostModel, depot: int = 0, capacity: float = math.inf):
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    req = []
    for k, (u, v) in enumerate(required_pairs):
        cf, cr = model.directed_costs(pts[u], pts[v], SERVICE)
        req.append(Edge(k, u, v, float(cf[0]), float(cr[0]), float(cf[0]), float(cr[0])))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    dh = []
    if pairs:
        a = np.array(pairs)
        cf, cr = model.directed_costs(pts[a[:, 0]], pts[a[:, 1]], DEADHEAD)
        dh = [Edge(k, i, j, float(cf[k]), float(cr[k]), float(cf[k]), float(cr[k])) for k, (i, j) in enumerate(pairs)]
    return CoverageGraph(pts, depot, req, dh, capacity)


def random_instance(rng: np.random.Generator, m: int, asymmetric: bool = False, finite: bool = False, scale=100.0):
    """``m`` disjoint random segments plus a depot, complete deadhead graph."""
    pts = [rng.uniform(0, scale, 2)]
    pairs = []
    for k in range(m):
        a = rng.uniform(0, scale, 2)
        b = a + rng.uniform(-0.3 * scale, 0.3 * scale, 2)
        pts.extend([a, b])
        pairs.append((2 * k + 1, 2 * k + 2))
    if asymmetric:
        model = CostModel.wind_speeds(3.33, 5.0, WindParams(1.39, float(rng.uniform(0, 360))))
    else:
        model = CostModel.length()
    g = complete_instance(pts, pairs, model)
    if finite and m:
        init = init_routes(g, shortest_deadheads(g))
        g.capacity = max(r.total_demand for r in init) * float(rng.uniform(1.0, 2.5))
    return g
