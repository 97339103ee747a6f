"""Turn-minimising cell decomposition.

Three stages: boustrophedon decomposition over every edge direction of the
environment (keeping the one with the least total altitude), greedy splitting
of cells along lines through reflex vertices, and merging of adjacent cells
that share a service direction.  Cells may end up non-monotone and may
contain holes.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    EPS_ANG,
    EPS_AREA_REL,
    EPS_GEOM,
    Point,
    PolygonWithHoles,
    _clean_ring,
    angle_between,
    normalize_angle,
    reflex_vertices,
    rotate_frame,
    shared_boundary,
    split_by_line,
    union_pair,
    unrotate_frame,
)

log = logging.getLogger(__name__)

EPS_MERGE_ANG = 1e-3
MAX_SPLIT_DEPTH = 16


@dataclass(frozen=True)
class Cell:
    shape: PolygonWithHoles
    service_direction: float
    msa: float


@dataclass(frozen=True)
class Decomposition:
    cells: tuple
    sweep_direction: float

    @property
    def total_msa(self) -> float:
        return sum(c.msa for c in self.cells)


@dataclass
class DecompositionStages:
    initial: Decomposition
    split: list = field(default_factory=list)
    merged: list = field(default_factory=list)

    @property
    def cells(self) -> list:
        return self.merged


def candidate_directions(poly: PolygonWithHoles) -> list:
    """Distinct edge orientations (mod pi) of the outer ring and holes, ascending."""
    e = poly.edges
    d = e[:, 1, :] - e[:, 0, :]
    d = d[np.hypot(d[:, 0], d[:, 1]) > EPS_GEOM]
    a = np.fmod(np.arctan2(d[:, 1], d[:, 0]), math.pi)
    a = np.where(a < 0, a + math.pi, a)
    a = np.where(a >= math.pi - EPS_ANG, 0.0, a)
    out: list = []
    for v in np.sort(a).tolist():
        if not out or v - out[-1] >= EPS_ANG:
            out.append(v)
    if len(out) > 1 and math.pi - out[-1] + out[0] < EPS_ANG:
        out.pop()
    return out


def altitudes(poly: PolygonWithHoles, directions) -> np.ndarray:
    """``altitude`` for several directions at once."""
    e = poly.edges
    th = np.asarray(directions, dtype=float)[:, None]
    s, c = np.sin(th), np.cos(th)
    ya = -e[None, :, 0, 0] * s + e[None, :, 0, 1] * c
    yb = -e[None, :, 1, 0] * s + e[None, :, 1, 1] * c
    # repeated levels give zero-width slabs, so no need to deduplicate
    levels = np.sort(np.concatenate([ya, yb], axis=1), axis=1)
    gaps = np.diff(levels, axis=1)
    mids = levels[:, :-1] + 0.5 * gaps
    below_a = ya[:, None, :] <= mids[:, :, None]
    below_b = yb[:, None, :] <= mids[:, :, None]
    counts = (below_a != below_b).sum(axis=2) // 2
    return (counts * gaps).sum(axis=1)


def altitude(poly: PolygonWithHoles, direction: float) -> float:
    """Sweep integral of the number of inside-intervals, perpendicular to ``direction``.

    For a polygon monotone w.r.t. ``direction`` this is its width measured
    perpendicular to it.
    """
    return float(altitudes(poly, [direction])[0])


def msa_of(poly: PolygonWithHoles) -> tuple:
    """Best service direction among the polygon's own edge orientations and its altitude."""
    dirs = candidate_directions(poly)
    if not dirs:
        return 0.0, math.inf
    alts = altitudes(poly, dirs).tolist()
    best_dir, best_alt = dirs[0], alts[0]
    for d, a in zip(dirs[1:], alts[1:]):
        if a < best_alt - 1e-9 * max(1.0, abs(best_alt)):
            best_dir, best_alt = d, a
    return best_dir, best_alt


def make_cell(shape: PolygonWithHoles) -> Cell:
    d, a = msa_of(shape)
    return Cell(shape, d, a)


def _snap_levels(ys: np.ndarray, tol: float):
    vals = np.unique(ys)
    starts = np.concatenate([[True], np.diff(vals) > tol])
    reps = vals[starts]
    idx = np.searchsorted(reps, ys, side="right") - 1
    return reps, reps[idx]


def bcd(env: PolygonWithHoles, direction: float) -> Decomposition:
    """Boustrophedon decomposition with sweep lines parallel to ``direction``.

    Works in the rotated frame: the polygon is cut into trapezoids between
    consecutive vertex heights, and vertically adjacent trapezoids are chained
    into one cell whenever the connection is one-to-one.  Split and merge
    events (and new or vanishing slice components) start new cells.
    """
    rot = rotate_frame(env, direction)
    x0, y0, x1, y1 = rot.bounds
    tol = 1e-9 * max(1.0, x1 - x0, y1 - y0)
    edges = rot.edges.copy()
    levels, snapped = _snap_levels(edges[:, :, 1].ravel(), tol)
    edges[:, :, 1] = snapped.reshape(-1, 2)
    ya, yb = edges[:, 0, 1], edges[:, 1, 1]
    xa, xb = edges[:, 0, 0], edges[:, 1, 0]

    slabs = []  # per slab: list of (xl0, xr0, xl1, xr1)
    for k in range(len(levels) - 1):
        lo, hi = levels[k], levels[k + 1]
        mid = 0.5 * (lo + hi)
        idx = np.nonzero((ya <= mid) != (yb <= mid))[0]
        if len(idx) == 0:
            slabs.append([])
            continue
        slope = (xb[idx] - xa[idx]) / (yb[idx] - ya[idx])
        xm = xa[idx] + (mid - ya[idx]) * slope
        xlo = xa[idx] + (lo - ya[idx]) * slope
        xhi = xa[idx] + (hi - ya[idx]) * slope
        order = np.argsort(xm, kind="stable")
        xlo, xhi = xlo[order], xhi[order]
        slabs.append(
            [(xlo[i], xlo[i + 1], xhi[i], xhi[i + 1]) for i in range(0, len(order) - 1, 2)]
        )

    cells: list = []  # each: list of (slab index, trapezoid)
    prev_owner: list = []
    for k, traps in enumerate(slabs):
        owner = []
        if k == 0 or not slabs[k - 1]:
            for t in traps:
                cells.append([(k, t)])
                owner.append(len(cells) - 1)
            prev_owner = owner
            continue
        below = slabs[k - 1]
        ups = [[] for _ in below]
        downs = [[] for _ in traps]
        for i, b in enumerate(below):
            for j, t in enumerate(traps):
                if min(b[3], t[1]) - max(b[2], t[0]) > tol:
                    ups[i].append(j)
                    downs[j].append(i)
        for j, t in enumerate(traps):
            if len(downs[j]) == 1 and len(ups[downs[j][0]]) == 1:
                c = prev_owner[downs[j][0]]
                cells[c].append((k, t))
                owner.append(c)
            else:
                cells.append([(k, t)])
                owner.append(len(cells) - 1)
        prev_owner = owner

    out = []
    for chain in cells:
        right = []
        left = []
        for k, (xl0, xr0, xl1, xr1) in chain:
            right += [(xr0, levels[k]), (xr1, levels[k + 1])]
            left += [(xl0, levels[k]), (xl1, levels[k + 1])]
        ring = _clean_ring(right + left[::-1], drop_collinear=True)
        if len(ring) < 3:
            continue
        shape = unrotate_frame(PolygonWithHoles(tuple(ring)), direction)
        out.append(make_cell(shape))
    return Decomposition(tuple(out), direction)


def initial_decomposition(env: PolygonWithHoles) -> Decomposition:
    """The boustrophedon decomposition with least total altitude over all edge directions."""
    best = None
    for d in candidate_directions(env):
        dec = bcd(env, d)
        if best is None or dec.total_msa < best.total_msa - 1e-9 * max(1.0, best.total_msa):
            best = dec
    return best


def splitting_lines(shape: PolygonWithHoles) -> list:
    """Candidate cut lines ``(anchor, angle)`` through reflex vertices.

    Type 1: the supporting lines of the two edges at a reflex vertex.
    Type 2: lines through a reflex vertex parallel to some edge of the cell,
    with both neighbouring edges strictly on one side.  Coincident lines are
    reported once.
    """
    dirs = candidate_directions(shape)
    raw = []
    rings = shape.rings
    flat_index = 0
    offsets = []
    for r in rings:
        offsets.append(flat_index)
        flat_index += len(r)
    for ri, vi in reflex_vertices(shape):
        ring = rings[ri]
        p, v, n = ring[vi - 1], ring[vi], ring[(vi + 1) % len(ring)]
        anchor = offsets[ri] + vi
        raw.append((normalize_angle(math.atan2(v.y - p.y, v.x - p.x)), anchor, v))
        raw.append((normalize_angle(math.atan2(n.y - v.y, n.x - v.x)), anchor, v))
        lp = math.hypot(p.x - v.x, p.y - v.y)
        ln = math.hypot(n.x - v.x, n.y - v.y)
        for d in dirs:
            c, s = math.cos(d), math.sin(d)
            sp = (c * (p.y - v.y) - s * (p.x - v.x)) / lp
            sn = (c * (n.y - v.y) - s * (n.x - v.x)) / ln
            if sp * sn > 0 and abs(sp) > EPS_ANG and abs(sn) > EPS_ANG:
                raw.append((d, anchor, v))
    raw.sort(key=lambda r: (r[0], r[1]))
    lines: list = []
    for ang, _, v in raw:
        dup = False
        for ang2, w in lines:
            if angle_between(ang, ang2) < EPS_ANG:
                if abs(-math.sin(ang2) * (v.x - w.x) + math.cos(ang2) * (v.y - w.y)) < EPS_GEOM:
                    dup = True
                    break
        if not dup:
            lines.append((ang, v))
    return [(v, ang) for ang, v in lines]


def greedy_split(cell: Cell, depth: int = 0) -> list:
    """Recursively split ``cell`` along the best reflex-vertex line while total MSA drops."""
    if depth >= MAX_SPLIT_DEPTH:
        log.warning("greedy split depth cap reached for a cell of area %.3f", cell.shape.area)
        return [cell]
    best = None
    best_total = math.inf
    for anchor, ang in splitting_lines(cell.shape):
        pieces = split_by_line(cell.shape, anchor, ang)
        if len(pieces) < 2:
            continue
        split_cells = [make_cell(p) for p in pieces]
        total = sum(c.msa for c in split_cells)
        if total < best_total - 1e-12 * max(1.0, best_total if math.isfinite(best_total) else 1.0):
            best, best_total = split_cells, total
    if best is None or best_total >= cell.msa - EPS_AREA_REL * max(1.0, cell.msa):
        return [cell]
    out = []
    for c in best:
        out.extend(greedy_split(c, depth + 1))
    return out


def merge_cells(cells) -> list:
    """Merge adjacent cells with (nearly) equal service directions until none remain.

    Always merges the pair with the lowest index pair first; the merged cell
    keeps the direction of the lower-indexed cell and is allowed to be
    non-monotone or to enclose a hole.
    """
    cells = list(cells)
    uids = list(range(len(cells)))
    next_uid = len(cells)
    adjacency: dict = {}

    def adjacent(i: int, j: int) -> bool:
        key = (min(uids[i], uids[j]), max(uids[i], uids[j]))
        if key not in adjacency:
            adjacency[key] = bool(shared_boundary(cells[i].shape, cells[j].shape))
        return adjacency[key]

    changed = True
    while changed:
        changed = False
        for i in range(len(cells)):
            for j in range(i + 1, len(cells)):
                a, b = cells[i], cells[j]
                if angle_between(a.service_direction, b.service_direction) >= EPS_MERGE_ANG:
                    continue
                if not adjacent(i, j):
                    continue
                shape = union_pair(a.shape, b.shape)
                merged = Cell(shape, a.service_direction, altitude(shape, a.service_direction))
                # the union touches exactly the cells either part touched
                for k in range(len(cells)):
                    if k not in (i, j):
                        adjacency[(min(next_uid, uids[k]), max(next_uid, uids[k]))] = adjacent(i, k) or adjacent(j, k)
                cells[i] = merged
                uids[i] = next_uid
                next_uid += 1
                del cells[j]
                del uids[j]
                changed = True
                break
            if changed:
                break
    return cells


def decompose(env: PolygonWithHoles, split: bool = True, merge: bool = True) -> DecompositionStages:
    init = initial_decomposition(env)
    stages = DecompositionStages(init)
    cells = list(init.cells)
    if split:
        split_cells = []
        for c in cells:
            split_cells.extend(greedy_split(c))
        cells = split_cells
    stages.split = cells
    stages.merged = merge_cells(cells) if merge else list(cells)
    return stages
