"""Merge-Embed-Merge savings heuristic for capacitated line coverage.

Every required edge starts on its own depot-to-depot route.  Pairs of routes
are merged in order of decreasing savings, where a merge may concatenate the
two routes in either order and either orientation (eight ways).  Candidate
merges live in a max-heap; entries touching a consumed route are dropped
lazily when popped.

Internally a route is summarised by the first and last vertex of its service
chain and the chain's cost and demand in both orientations, so evaluating a
merge never walks the route.
"""
from __future__ import annotations

import heapq
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .costs import DEADHEAD, SERVICE
from .errors import InfeasibleEdge, Infeasible, TooLarge
from .graph import CoverageGraph, DeadheadPathTable, shortest_deadheads

TURN_EPS_DEG = 1.0
ORACLE_MAX_EDGES = 5


@dataclass(frozen=True)
class Step:
    edge: int
    forward: bool
    mode: str
    u: int
    v: int
    cost: float
    demand: float


@dataclass
class Route:
    id: int
    services: tuple  # ((required edge id, forward), ...) in travel order
    start: int  # first vertex of the service chain
    end: int
    chain_cost: tuple  # (as stored, reversed)
    chain_demand: tuple
    total_cost: float
    total_demand: float
    valid: bool = True
    steps: tuple = ()

    def reversed_services(self) -> tuple:
        return tuple((e, not f) for e, f in reversed(self.services))


@dataclass(frozen=True)
class SavingsEntry:
    i: int
    j: int
    config: int  # 1..8
    savings: float
    merged_demand: float

    def heap_key(self) -> tuple:
        return (-self.savings, self.merged_demand, self.i, self.j, self.config)


@dataclass
class Solution:
    routes: list
    total_cost: float
    total_demand: float
    turns: int = 0
    cost_history: list = field(default_factory=list)

    @property
    def route_costs(self) -> list:
        return [r.total_cost for r in self.routes]

    @property
    def route_demands(self) -> list:
        return [r.total_demand for r in self.routes]

    def serviced_edges(self) -> list:
        return [s.edge for r in self.routes for s in r.steps if s.mode == SERVICE]

    def to_dict(self, g: CoverageGraph | None = None) -> dict:
        routes = []
        for k, r in enumerate(self.routes):
            item = {
                "route_id": k,
                "cost": r.total_cost,
                "demand": r.total_demand,
                "turns": count_route_turns(r, g.points) if g is not None else None,
                "vertices": route_vertices(r),
                "steps": [
                    {"edge": s.edge, "mode": s.mode, "forward": s.forward, "from": s.u, "to": s.v,
                     "cost": s.cost, "demand": s.demand}
                    for s in r.steps
                ],
            }
            routes.append(item)
        return {
            "total_cost": self.total_cost,
            "total_demand": self.total_demand,
            "turns": self.turns,
            "routes": routes,
        }

    def save(self, path, g: CoverageGraph | None = None) -> None:
        Path(path).write_text(json.dumps(self.to_dict(g), indent=1))


class _Tables:
    """Dense views of the instance used by the solver."""

    def __init__(self, g: CoverageGraph, table: DeadheadPathTable):
        self.g = g
        self.table = table
        self.D = table.cost
        self.Dd = table.demand
        self.dep = g.depot
        self.req = {e.id: e for e in g.required}
        self.dh = {e.id: e for e in g.deadhead}

    def chain(self, services) -> tuple:
        """(start, end, cost, demand) of a service sequence including internal deadheads."""
        cost = demand = 0.0
        prev = None
        start = None
        for eid, fwd in services:
            e = self.req[eid]
            u, v = (e.u, e.v) if fwd else (e.v, e.u)
            if prev is None:
                start = u
            else:
                cost += self.D[prev, u]
                demand += self.Dd[prev, u]
            cost += e.cost(fwd)
            demand += e.demand(fwd)
            prev = v
        return start, prev, cost, demand

    def route(self, rid: int, services) -> Route:
        s, e, cf, df = self.chain(services)
        _, _, cr, dr = self.chain(tuple((k, not f) for k, f in reversed(services)))
        total = self.D[self.dep, s] + cf + self.D[e, self.dep]
        demand = self.Dd[self.dep, s] + df + self.Dd[e, self.dep]
        return Route(rid, tuple(services), s, e, (cf, cr), (df, dr), float(total), float(demand))


def _feasible(demand, capacity):
    return demand <= capacity


def init_routes(g: CoverageGraph, table: DeadheadPathTable | None = None) -> list:
    """One depot-to-depot route per required edge, in its cheaper service direction."""
    tabs = _Tables(g, table if table is not None else shortest_deadheads(g))
    routes = []
    for k, e in enumerate(g.required):
        fwd = tabs.route(k, ((e.id, True),))
        rev = tabs.route(k, ((e.id, False),))
        options = [r for r in (fwd, rev) if _feasible(r.total_demand, g.capacity)]
        if not options:
            raise InfeasibleEdge(e.id, min(fwd.total_demand, rev.total_demand), g.capacity)
        # ties go to the forward direction
        routes.append(options[0] if len(options) == 1 or fwd.total_cost <= rev.total_cost else options[1])
    return routes


def _oriented(r: Route, rev: bool) -> tuple:
    if rev:
        return r.end, r.start, r.chain_cost[1], r.chain_cost[0], r.chain_demand[1], r.chain_demand[0]
    return r.start, r.end, r.chain_cost[0], r.chain_cost[1], r.chain_demand[0], r.chain_demand[1]


def _config_parts(config: int) -> tuple:
    """(i goes first, reverse i, reverse j) for a configuration number 1..8."""
    c = config - 1
    return c < 4, bool(c & 2), bool(c & 1)


def _savings_tol(a: float, b: float) -> float:
    return 1e-12 * max(1.0, abs(a) + abs(b))


def _batch_savings(tabs: _Tables, ri: Route, others: list, capacity: float):
    """Best feasible configuration of ``ri`` against each route in ``others``.

    Returns arrays (savings, merged demand, config) with savings -inf where no
    configuration is feasible.
    """
    D, Dd, dep = tabs.D, tabs.Dd, tabs.dep
    n = len(others)
    s = np.array([r.start for r in others])
    e = np.array([r.end for r in others])
    cc = np.array([r.chain_cost for r in others], dtype=float).reshape(n, 2)
    cd = np.array([r.chain_demand for r in others], dtype=float).reshape(n, 2)
    base = ri.total_cost + np.array([r.total_cost for r in others])

    best_sav = np.full(n, -np.inf)
    best_dem = np.full(n, np.inf)
    best_cfg = np.zeros(n, dtype=int)
    for config in range(1, 9):
        i_first, rev_i, rev_j = _config_parts(config)
        si, ei, ci, _, di, _ = _oriented(ri, rev_i)
        if rev_j:
            sj, ej, cj, dj = e, s, cc[:, 1], cd[:, 1]
        else:
            sj, ej, cj, dj = s, e, cc[:, 0], cd[:, 0]
        if i_first:
            cost = D[dep, si] + ci + D[ei, sj] + cj + D[ej, dep]
            dem = Dd[dep, si] + di + Dd[ei, sj] + dj + Dd[ej, dep]
        else:
            cost = D[dep, sj] + cj + D[ej, si] + ci + D[ei, dep]
            dem = Dd[dep, sj] + dj + Dd[ej, si] + di + Dd[ei, dep]
        sav = np.where(_feasible(dem, capacity), base - cost, -np.inf)
        better = (sav > best_sav) | ((sav == best_sav) & (dem < best_dem) & np.isfinite(sav))
        best_sav = np.where(better, sav, best_sav)
        best_dem = np.where(better, dem, best_dem)
        best_cfg = np.where(better, config, best_cfg)
    return best_sav, best_dem, best_cfg


def merge_candidates(ri: Route, rj: Route, g: CoverageGraph, table: DeadheadPathTable, capacity=None):
    """Best positive-savings feasible merge of two routes, or None."""
    tabs = _Tables(g, table)
    cap = g.capacity if capacity is None else capacity
    sav, dem, cfg = _batch_savings(tabs, ri, [rj], cap)
    if not sav[0] > _savings_tol(ri.total_cost, rj.total_cost):
        return None
    return SavingsEntry(ri.id, rj.id, int(cfg[0]), float(sav[0]), float(dem[0]))


def _merge(tabs: _Tables, ri: Route, rj: Route, config: int, new_id: int) -> Route:
    i_first, rev_i, rev_j = _config_parts(config)
    a = ri.reversed_services() if rev_i else ri.services
    b = rj.reversed_services() if rev_j else rj.services
    si, ei, ci, ci_r, di, di_r = _oriented(ri, rev_i)
    sj, ej, cj, cj_r, dj, dj_r = _oriented(rj, rev_j)
    if not i_first:
        a, b = b, a
        si, ei, ci, ci_r, di, di_r, sj, ej, cj, cj_r, dj, dj_r = sj, ej, cj, cj_r, dj, dj_r, si, ei, ci, ci_r, di, di_r
    D, Dd, dep = tabs.D, tabs.Dd, tabs.dep
    cf = ci + D[ei, sj] + cj
    cr = cj_r + D[sj, ei] + ci_r
    df = di + Dd[ei, sj] + dj
    dr = dj_r + Dd[sj, ei] + di_r
    total = D[dep, si] + cf + D[ej, dep]
    demand = Dd[dep, si] + df + Dd[ej, dep]
    return Route(new_id, a + b, si, ej, (float(cf), float(cr)), (float(df), float(dr)), float(total), float(demand))


def _solution_cost(routes) -> float:
    return float(sum(r.total_cost for r in routes if r.valid))


def mem_solve(g: CoverageGraph, capacity=None, table: DeadheadPathTable | None = None) -> Solution:
    """Run the savings merge loop to completion."""
    if capacity is not None and capacity != g.capacity:
        g = CoverageGraph(g.points, g.depot, g.required, g.deadhead, capacity, g.track_of)
    table = table if table is not None else shortest_deadheads(g)
    tabs = _Tables(g, table)
    routes = init_routes(g, table)
    cap = g.capacity

    heap = []
    for k in range(len(routes) - 1):
        others = routes[k + 1 :]
        sav, dem, cfg = _batch_savings(tabs, routes[k], others, cap)
        idx = _positive(sav, routes[k], others)
        heap.extend(zip((-sav[idx]).tolist(), dem[idx].tolist(), itertools.repeat(k), (idx + k + 1).tolist(),
                        cfg[idx].tolist()))
    heapq.heapify(heap)

    history = [_solution_cost(routes)]
    current = history[0]
    while heap:
        neg_sav, dem, i, j, cfg = heapq.heappop(heap)
        ri, rj = routes[i], routes[j]
        if not (ri.valid and rj.valid):
            continue
        merged = _merge(tabs, ri, rj, cfg, len(routes))
        if not _feasible(merged.total_demand, cap):
            continue
        ri.valid = rj.valid = False
        routes.append(merged)
        current = current - ri.total_cost - rj.total_cost + merged.total_cost
        history.append(current)

        live = [r for r in routes[:-1] if r.valid]
        if live:
            sav, dem_arr, cfg_arr = _batch_savings(tabs, merged, live, cap)
            idx = _positive(sav, merged, live)
            # keep the lower id first so tie-breaking matches a fresh seed
            ids = [live[k].id for k in idx.tolist()]
            for entry in zip((-sav[idx]).tolist(), dem_arr[idx].tolist(), ids, itertools.repeat(merged.id),
                             _SWAPPED[cfg_arr[idx]].tolist()):
                heapq.heappush(heap, entry)

    final = [r for r in routes if r.valid]
    return _finish(tabs, final, history)


def _swap_config(config: int) -> int:
    """Same merge with the roles of the two routes exchanged."""
    i_first, rev_i, rev_j = _config_parts(config)
    return 1 + (0 if not i_first else 4) + (2 if rev_j else 0) + (1 if rev_i else 0)


_SWAPPED = np.array([0] + [_swap_config(c) for c in range(1, 9)])


def _positive(sav: np.ndarray, ri: Route, others: list) -> np.ndarray:
    """Indices of ``others`` whose savings against ``ri`` clear the tolerance."""
    costs = np.fromiter((r.total_cost for r in others), float, len(others))
    tol = 1e-12 * np.maximum(1.0, abs(ri.total_cost) + np.abs(costs))
    return np.nonzero(np.isfinite(sav) & (sav > tol))[0]


def _expand(tabs: _Tables, r: Route) -> tuple:
    steps = []

    def deadhead(u, v):
        path = tabs.table.path(u, v)
        for a, b in zip(path[:-1], path[1:]):
            e = tabs.dh[int(tabs.table.arc[a, b])]
            fwd = (e.u, e.v) == (a, b)
            steps.append(Step(e.id, fwd, DEADHEAD, a, b, e.cost(fwd), e.demand(fwd)))

    at = tabs.dep
    for eid, fwd in r.services:
        e = tabs.req[eid]
        u, v = (e.u, e.v) if fwd else (e.v, e.u)
        deadhead(at, u)
        steps.append(Step(eid, fwd, SERVICE, u, v, e.cost(fwd), e.demand(fwd)))
        at = v
    deadhead(at, tabs.dep)
    return tuple(steps)


def _finish(tabs: _Tables, routes, history) -> Solution:
    out = []
    for k, r in enumerate(routes):
        steps = _expand(tabs, r)
        out.append(
            Route(k, r.services, r.start, r.end, r.chain_cost, r.chain_demand,
                  float(math.fsum(s.cost for s in steps)), float(math.fsum(s.demand for s in steps)),
                  True, steps)
        )
    sol = Solution(out, float(math.fsum(r.total_cost for r in out)), float(math.fsum(r.total_demand for r in out)),
                   cost_history=list(history))
    sol.turns = count_turns(sol, tabs.g.points)
    return sol


def brute_force_oracle(g: CoverageGraph, capacity=None, table: DeadheadPathTable | None = None) -> Solution:
    """Exact optimum by enumerating partitions, orders and directions (small instances only)."""
    m = len(g.required)
    if m > ORACLE_MAX_EDGES:
        raise TooLarge(f"exhaustive search is limited to {ORACLE_MAX_EDGES} required edges, got {m}")
    if capacity is not None and capacity != g.capacity:
        g = CoverageGraph(g.points, g.depot, g.required, g.deadhead, capacity, g.track_of)
    table = table if table is not None else shortest_deadheads(g)
    tabs = _Tables(g, table)
    init_routes(g, table)  # same infeasibility report as the heuristic
    ids = [e.id for e in g.required]

    best_route: dict = {}
    for mask in range(1, 1 << m):
        members = [ids[k] for k in range(m) if mask >> k & 1]
        best = None
        for order in itertools.permutations(members):
            for dirs in itertools.product((True, False), repeat=len(order)):
                r = tabs.route(0, tuple(zip(order, dirs)))
                if _feasible(r.total_demand, g.capacity) and (best is None or r.total_cost < best.total_cost):
                    best = r
        best_route[mask] = best

    # cheapest partition into feasible routes, by subset DP
    full = (1 << m) - 1
    cost = {0: 0.0}
    choice: dict = {}
    for mask in range(1, full + 1):
        low = mask & -mask
        sub = mask
        best_c, best_s = math.inf, None
        while sub:
            if sub & low and best_route[sub] is not None and (mask ^ sub) in cost:
                c = best_route[sub].total_cost + cost[mask ^ sub]
                if c < best_c:
                    best_c, best_s = c, sub
            sub = (sub - 1) & mask
        if best_s is not None:
            cost[mask] = best_c
            choice[mask] = best_s
    if full not in cost:
        raise Infeasible("no capacity-feasible partition of the required edges")
    routes = []
    mask = full
    while mask:
        routes.append(best_route[choice[mask]])
        mask ^= choice[mask]
    return _finish(tabs, routes, [cost[full]])


def route_vertices(r: Route) -> list:
    if not r.steps:
        return []
    return [r.steps[0].u] + [s.v for s in r.steps]


def count_route_turns(r: Route, points, eps_deg: float = TURN_EPS_DEG) -> int:
    pts = np.asarray(points, dtype=float)
    seq = route_vertices(r)
    dirs = []
    for a, b in zip(seq[:-1], seq[1:]):
        d = pts[b] - pts[a]
        if math.hypot(d[0], d[1]) > 1e-12:
            dirs.append(math.atan2(d[1], d[0]))
    turns = 0
    lim = math.radians(eps_deg)
    for a, b in zip(dirs[:-1], dirs[1:]):
        diff = abs((b - a + math.pi) % (2 * math.pi) - math.pi)
        if diff > lim:
            turns += 1
    return turns


def count_turns(sol: Solution, points, eps_deg: float = TURN_EPS_DEG) -> int:
    """Direction changes above ``eps_deg`` at interior route vertices, summed over routes."""
    return sum(count_route_turns(r, points, eps_deg) for r in sol.routes)
