"""Line-coverage instance built from service tracks.

Vertices are the track endpoints, the environment vertices and the depot.
Every track becomes a required edge; every pair of mutually visible vertices
gets a deadhead edge.  ``shortest_deadheads`` turns the deadhead edges into
an all-pairs table of cheapest deadhead travel.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .costs import DEADHEAD, SERVICE, CostModel
from .errors import DisconnectedInstance, FormatError, InvalidDepot
from .geometry import EPS_GEOM, PolygonWithHoles, points_in_closure, segments_in_free_space

INSTANCE_FORMAT = "line-coverage-instance/1"


@dataclass(frozen=True)
class Edge:
    id: int
    u: int
    v: int
    cost_fwd: float
    cost_rev: float
    demand_fwd: float
    demand_rev: float

    def cost(self, forward: bool = True) -> float:
        return self.cost_fwd if forward else self.cost_rev

    def demand(self, forward: bool = True) -> float:
        return self.demand_fwd if forward else self.demand_rev

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "u": self.u,
            "v": self.v,
            "cost_fwd": self.cost_fwd,
            "cost_rev": self.cost_rev,
            "demand_fwd": self.demand_fwd,
            "demand_rev": self.demand_rev,
        }


@dataclass
class CoverageGraph:
    points: np.ndarray
    depot: int
    required: list
    deadhead: list
    capacity: float = math.inf
    # index into the track list for each required edge, when built from tracks
    track_of: list = field(default_factory=list)

    @property
    def n_vertices(self) -> int:
        return len(self.points)

    def to_dict(self) -> dict:
        return {
            "format": INSTANCE_FORMAT,
            "vertices": [[float(x), float(y)] for x, y in self.points],
            "depot": int(self.depot),
            "capacity": "inf" if math.isinf(self.capacity) else float(self.capacity),
            "required_edges": [e.to_dict() for e in self.required],
            "non_required_edges": [e.to_dict() for e in self.deadhead],
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def from_dict(cls, data: dict) -> "CoverageGraph":
        try:
            pts = np.array(data["vertices"], dtype=float).reshape(-1, 2)
            depot = int(data["depot"])
            cap = data.get("capacity", "inf")
            cap = math.inf if cap in ("inf", None) else float(cap)
            req = [_edge_from(d, i) for i, d in enumerate(data.get("required_edges", []))]
            dh = [_edge_from(d, i) for i, d in enumerate(data.get("non_required_edges", []))]
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed line-coverage instance: {exc}") from exc
        n = len(pts)
        if not 0 <= depot < n:
            raise FormatError(f"depot {depot} is not a vertex id")
        for kind, edges in (("required", req), ("non-required", dh)):
            for e in edges:
                if not (0 <= e.u < n and 0 <= e.v < n):
                    raise FormatError(f"{kind} edge {e.id} references a missing vertex")
                if min(e.cost_fwd, e.cost_rev, e.demand_fwd, e.demand_rev) < 0:
                    raise FormatError(f"{kind} edge {e.id} has a negative cost or demand")
        if not cap > 0:
            raise FormatError(f"capacity must be positive, got {cap}")
        return cls(pts, depot, req, dh, cap)

    @classmethod
    def load(cls, path) -> "CoverageGraph":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
        return cls.from_dict(data)


def _edge_from(d: dict, default_id: int) -> Edge:
    cf = float(d["cost_fwd"])
    cr = float(d.get("cost_rev", cf))
    return Edge(
        int(d.get("id", default_id)),
        int(d["u"]),
        int(d["v"]),
        cf,
        cr,
        float(d.get("demand_fwd", cf)),
        float(d.get("demand_rev", d.get("demand_fwd", cr))),
    )


class _VertexIndex:
    """Insert-or-find for points, merging anything closer than ``tol``."""

    def __init__(self, tol: float = EPS_GEOM):
        self.tol = tol
        self.points: list = []
        self._grid: dict = {}

    def add(self, p) -> int:
        x, y = float(p[0]), float(p[1])
        gx, gy = math.floor(x / self.tol), math.floor(y / self.tol)
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for i in self._grid.get((gx + dx, gy + dy), ()):
                    q = self.points[i]
                    if math.hypot(q[0] - x, q[1] - y) <= self.tol:
                        return i
        self.points.append((x, y))
        self._grid.setdefault((gx, gy), []).append(len(self.points) - 1)
        return len(self.points) - 1


def build_vertices(env: PolygonWithHoles, tracks, depot) -> tuple:
    """Deduplicated vertex array, depot id and (u, v) ids for each track.

    The depot is always vertex 0.
    """
    if not bool(points_in_closure(env, [depot])[0]):
        raise InvalidDepot(f"depot {tuple(depot)} is outside the free workspace")
    index = _VertexIndex()
    depot_id = index.add(depot)
    ends = []
    for t in tracks:
        seg = t.segment if hasattr(t, "segment") else t
        ends.append((index.add(seg.a), index.add(seg.b)))
    for ring in env.rings:
        for p in ring:
            index.add(p)
    return np.array(index.points, dtype=float), depot_id, ends


def visibility_edges(env: PolygonWithHoles, points, fly_over_holes: bool = False) -> list:
    """All vertex pairs ``(i, j)``, ``i < j``, joined by a segment in free space.

    Brute force: each candidate segment is tested against every obstacle edge.
    """
    pts = np.asarray(points, dtype=float)
    out = []
    for i in range(len(pts) - 1):
        ok = segments_in_free_space(env, pts[i], pts[i + 1 :], fly_over_holes)
        out.extend((i, i + 1 + int(j)) for j in np.nonzero(ok)[0])
    return out


def require_tracks(tracks, ends, points, model: CostModel, first_deadhead_id: int = 0) -> tuple:
    """Required edges for the tracks plus their deadhead-mode twins."""
    required, twins = [], []
    if not tracks:
        return required, twins
    p = np.array([points[u] for u, _ in ends])
    q = np.array([points[v] for _, v in ends])
    scf, scr = model.directed_costs(p, q, SERVICE)
    dcf, dcr = model.directed_costs(p, q, DEADHEAD)
    dm = model.demand or model
    sdf, sdr = dm.directed_costs(p, q, SERVICE)
    ddf, ddr = dm.directed_costs(p, q, DEADHEAD)
    for k, (u, v) in enumerate(ends):
        required.append(Edge(k, u, v, float(scf[k]), float(scr[k]), float(sdf[k]), float(sdr[k])))
        twins.append(Edge(first_deadhead_id + k, u, v, float(dcf[k]), float(dcr[k]), float(ddf[k]), float(ddr[k])))
    return required, twins


def build_graph(
    env: PolygonWithHoles,
    tracks,
    depot,
    model: CostModel,
    capacity: float = math.inf,
    fly_over_holes: bool = False,
    deadhead_on_tracks: bool = True,
) -> CoverageGraph:
    points, depot_id, ends = build_vertices(env, tracks, depot)
    keep = [k for k, (u, v) in enumerate(ends) if u != v]
    tracks = [tracks[k] for k in keep]
    ends = [ends[k] for k in keep]
    required, twins = require_tracks(tracks, ends, points, model)
    pairs = visibility_edges(env, points, fly_over_holes)
    deadhead = []
    if pairs:
        arr = np.array(pairs)
        p, q = points[arr[:, 0]], points[arr[:, 1]]
        cf, cr = model.directed_costs(p, q, DEADHEAD)
        df, dr = (model.demand or model).directed_costs(p, q, DEADHEAD)
        deadhead = [
            Edge(k, int(i), int(j), float(cf[k]), float(cr[k]), float(df[k]), float(dr[k]))
            for k, (i, j) in enumerate(pairs)
        ]
    if deadhead_on_tracks:
        offset = len(deadhead)
        deadhead += [Edge(offset + t.id, t.u, t.v, t.cost_fwd, t.cost_rev, t.demand_fwd, t.demand_rev) for t in twins]
    return CoverageGraph(points, depot_id, required, deadhead, capacity, track_of=keep)


@dataclass
class DeadheadPathTable:
    cost: np.ndarray
    demand: np.ndarray
    pred: np.ndarray
    arc: np.ndarray  # deadhead edge id used for the hop u -> v, -1 if none

    def path(self, u: int, v: int) -> list:
        """Vertex sequence of the cheapest deadhead path from ``u`` to ``v``."""
        if u == v:
            return [u]
        seq = [v]
        while seq[-1] != u:
            prev = int(self.pred[u, seq[-1]])
            if prev < 0:
                raise DisconnectedInstance(v, f"no deadhead path from {u} to {v}")
            seq.append(prev)
        return seq[::-1]


def _arc_matrices(g: CoverageGraph):
    n = g.n_vertices
    cost = np.full((n, n), np.inf)
    demand = np.full((n, n), np.inf)
    arc = np.full((n, n), -1, dtype=np.int64)
    if not g.deadhead:
        return cost, demand, arc
    f = np.array([(e.id, e.u, e.v, e.cost_fwd, e.cost_rev, e.demand_fwd, e.demand_rev) for e in g.deadhead])
    ids = f[:, 0].astype(np.int64)
    u, v = f[:, 1].astype(np.int64), f[:, 2].astype(np.int64)
    a = np.concatenate([u, v])
    b = np.concatenate([v, u])
    c = np.concatenate([f[:, 3], f[:, 4]])
    d = np.concatenate([f[:, 5], f[:, 6]])
    eid = np.concatenate([ids, ids])
    keep = a != b
    a, b, c, d, eid = a[keep], b[keep], c[keep], d[keep], eid[keep]
    # cheapest arc per ordered pair; equal costs keep the earliest edge
    order = np.lexsort((np.arange(len(c)), c, b, a))
    a, b, c, d, eid = a[order], b[order], c[order], d[order], eid[order]
    first = np.ones(len(a), dtype=bool)
    first[1:] = (a[1:] != a[:-1]) | (b[1:] != b[:-1])
    cost[a[first], b[first]] = c[first]
    demand[a[first], b[first]] = d[first]
    arc[a[first], b[first]] = eid[first]
    return cost, demand, arc


def shortest_deadheads(g: CoverageGraph) -> DeadheadPathTable:
    """All-pairs cheapest deadhead costs, with demand accumulated along the chosen paths."""
    n = g.n_vertices
    arc_cost, arc_demand, arc = _arc_matrices(g)
    finite = np.isfinite(arc_cost)
    rows, cols = np.nonzero(finite)
    # zero-cost arcs would vanish from a sparse matrix; lift them to a tiny weight
    weights = np.maximum(arc_cost[rows, cols], 1e-300)
    graph = csr_matrix((weights, (rows, cols)), shape=(n, n))
    dist, pred = dijkstra(graph, directed=True, return_predecessors=True)
    dist[np.arange(n), np.arange(n)] = 0.0

    unreachable = np.nonzero(~np.isfinite(dist[g.depot]) | ~np.isfinite(dist[:, g.depot]))[0]
    if len(unreachable):
        raise DisconnectedInstance(int(unreachable[0]))

    if np.array_equal(arc_cost[finite], arc_demand[finite]):
        demand = dist.copy()
    else:
        demand = np.full((n, n), np.inf)
        for s in range(n):
            demand[s, s] = 0.0
            for v in np.argsort(dist[s], kind="stable"):
                p = pred[s, v]
                if v != s and p >= 0:
                    demand[s, v] = demand[s, p] + arc_demand[p, v]
    return DeadheadPathTable(dist, demand, pred, arc)
