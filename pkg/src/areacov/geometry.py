"""Planar geometry primitives used by every stage of the planner.

Polygons are immutable values: an outer ring (counter-clockwise) and zero or
more hole rings (clockwise).  Coordinates are meters.  Boolean operations
(splitting a polygon by a line, uniting two adjacent cells) are delegated to
shapely; sweep queries and free-space segment tests are implemented here on
numpy arrays.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np
import shapely
from shapely.geometry import LinearRing, LineString, MultiPolygon
from shapely.geometry import Polygon as ShapelyPolygon
from shapely.geometry.polygon import orient

from .errors import GeometryError, InvalidRing, NotAdjacent

EPS_GEOM = 1e-6  # point coincidence, meters
EPS_ANG = 1e-6  # direction equality, radians
EPS_AREA_REL = 1e-6  # area tolerance relative to the polygon area


class Point(NamedTuple):
    x: float
    y: float


class Segment(NamedTuple):
    a: Point
    b: Point

    @property
    def length(self) -> float:
        return math.hypot(self.b.x - self.a.x, self.b.y - self.a.y)

    @property
    def angle(self) -> float:
        """Undirected orientation in [0, pi)."""
        return normalize_angle(math.atan2(self.b.y - self.a.y, self.b.x - self.a.x))

    def reversed(self) -> "Segment":
        return Segment(self.b, self.a)


Ring = tuple  # tuple[Point, ...]


def normalize_angle(angle: float) -> float:
    """Map an angle to an undirected line orientation in [0, pi)."""
    a = math.fmod(angle, math.pi)
    if a < 0:
        a += math.pi
    if a >= math.pi - EPS_ANG:
        a = 0.0
    return a


def angle_between(a: float, b: float) -> float:
    """Acute angle between two undirected orientations, in [0, pi/2]."""
    d = abs(a - b) % math.pi
    return min(d, math.pi - d)


def signed_area(ring: Sequence) -> float:
    """Shoelace area; positive for counter-clockwise rings."""
    if len(ring) < 3:
        raise InvalidRing(f"ring has {len(ring)} vertices, need at least 3")
    pts = np.asarray(ring, dtype=float)
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _clean_ring(coords: Iterable, tol: float = EPS_GEOM, drop_collinear: bool = False) -> list:
    pts = [Point(float(x), float(y)) for x, y in coords]
    out: list[Point] = []
    for p in pts:
        if out and math.hypot(p.x - out[-1].x, p.y - out[-1].y) <= tol:
            continue
        out.append(p)
    while len(out) > 1 and math.hypot(out[0].x - out[-1].x, out[0].y - out[-1].y) <= tol:
        out.pop()
    if drop_collinear and len(out) > 3:
        changed = True
        while changed and len(out) > 3:
            changed = False
            keep = []
            n = len(out)
            for i in range(n):
                p, q, r = out[i - 1], out[i], out[(i + 1) % n]
                ux, uy = q.x - p.x, q.y - p.y
                vx, vy = r.x - q.x, r.y - q.y
                cross = ux * vy - uy * vx
                dot = ux * vx + uy * vy
                if abs(cross) <= 1e-12 * math.hypot(ux, uy) * math.hypot(vx, vy) + 1e-18 and dot > 0:
                    changed = True
                    continue
                keep.append(q)
            if len(keep) >= 3:
                out = keep
            else:
                break
    return out


@dataclass(frozen=True)
class PolygonWithHoles:
    outer: tuple
    holes: tuple = ()

    @classmethod
    def from_coords(cls, outer, holes=(), *, validate: bool = True) -> "PolygonWithHoles":
        """Build a polygon from raw coordinate lists.

        With ``validate`` the rings are de-duplicated, checked for simplicity and
        containment, and re-oriented (outer CCW, holes CW) with a warning.
        """
        outer_pts = _clean_ring(outer)
        hole_pts = [_clean_ring(h) for h in holes]
        if not validate:
            return cls(tuple(outer_pts), tuple(tuple(h) for h in hole_pts))

        names = ["outer"] + [f"hole {i}" for i in range(len(hole_pts))]
        for name, ring in zip(names, [outer_pts] + hole_pts):
            if len(ring) < 3:
                raise InvalidRing(f"{name} ring has {len(ring)} distinct vertices, need at least 3")
            if not all(math.isfinite(c) for p in ring for c in p):
                raise GeometryError(f"{name} ring has non-finite coordinates")
            if not LinearRing(ring).is_simple:
                raise GeometryError(f"{name} ring is self-intersecting")
            if abs(signed_area(ring)) <= 0.0:
                raise GeometryError(f"{name} ring has zero area")

        if signed_area(outer_pts) < 0:
            warnings.warn("outer ring is clockwise; reversing", stacklevel=2)
            outer_pts.reverse()
        for i, h in enumerate(hole_pts):
            if signed_area(h) > 0:
                warnings.warn(f"hole {i} is counter-clockwise; reversing", stacklevel=2)
                h.reverse()

        shell = ShapelyPolygon(outer_pts)
        hole_polys = [ShapelyPolygon(h) for h in hole_pts]
        for i, hp in enumerate(hole_polys):
            if not shell.contains_properly(hp):
                raise GeometryError(f"hole {i} is not strictly inside the outer ring")
            for j in range(i):
                if hp.intersects(hole_polys[j]):
                    raise GeometryError(f"hole {i} intersects hole {j}")
        return cls(tuple(outer_pts), tuple(tuple(h) for h in hole_pts))

    @property
    def rings(self) -> tuple:
        return (self.outer,) + tuple(self.holes)

    @cached_property
    def edges(self) -> np.ndarray:
        """All boundary edges as an (E, 2, 2) array, ring by ring."""
        return _ring_edges(self.rings)

    @cached_property
    def outer_edges(self) -> np.ndarray:
        return _ring_edges((self.outer,))

    @cached_property
    def hole_edges(self) -> np.ndarray:
        return _ring_edges(self.holes)

    @cached_property
    def vertices(self) -> np.ndarray:
        return np.array([p for r in self.rings for p in r], dtype=float)

    @cached_property
    def area(self) -> float:
        return signed_area(self.outer) + sum(signed_area(h) for h in self.holes)

    @property
    def bounds(self) -> tuple:
        v = self.vertices
        return (float(v[:, 0].min()), float(v[:, 1].min()), float(v[:, 0].max()), float(v[:, 1].max()))

    @property
    def n_vertices(self) -> int:
        return sum(len(r) for r in self.rings)

    def to_shapely(self) -> ShapelyPolygon:
        return ShapelyPolygon(self.outer, [list(h) for h in self.holes])

    @classmethod
    def from_shapely(cls, poly: ShapelyPolygon, min_hole_area: float = 0.0) -> "PolygonWithHoles":
        poly = orient(poly, 1.0)
        outer = _clean_ring(poly.exterior.coords[:-1], drop_collinear=True)
        holes = []
        for interior in poly.interiors:
            h = _clean_ring(interior.coords[:-1], drop_collinear=True)
            if len(h) >= 3 and abs(signed_area(h)) > min_hole_area:
                holes.append(tuple(h))
        return cls(tuple(outer), tuple(holes))

    def transformed(self, angle: float) -> "PolygonWithHoles":
        """Rotate counter-clockwise by ``angle`` about the origin."""
        return PolygonWithHoles(
            tuple(Point(*p) for p in rotate_points(self.outer, angle)),
            tuple(tuple(Point(*p) for p in rotate_points(h, angle)) for h in self.holes),
        )


def _ring_edges(rings) -> np.ndarray:
    chunks = []
    for r in rings:
        a = np.asarray(r, dtype=float)
        chunks.append(np.stack([a, np.roll(a, -1, axis=0)], axis=1))
    if not chunks:
        return np.zeros((0, 2, 2))
    return np.concatenate(chunks, axis=0)


def is_reflex(poly: PolygonWithHoles, ring_index: int, vertex_index: int) -> bool:
    """True iff the interior angle at the vertex exceeds pi.

    Relies on the orientation convention (outer CCW, holes CW), under which the
    interior is always to the left of each directed edge.
    """
    rings = poly.rings
    if not 0 <= ring_index < len(rings):
        raise IndexError(f"ring index {ring_index} out of range")
    ring = rings[ring_index]
    if not 0 <= vertex_index < len(ring):
        raise IndexError(f"vertex index {vertex_index} out of range")
    p, q, r = ring[vertex_index - 1], ring[vertex_index], ring[(vertex_index + 1) % len(ring)]
    cross = (q.x - p.x) * (r.y - q.y) - (q.y - p.y) * (r.x - q.x)
    scale = math.hypot(q.x - p.x, q.y - p.y) * math.hypot(r.x - q.x, r.y - q.y)
    return cross < -1e-12 * scale


def reflex_vertices(poly: PolygonWithHoles) -> list:
    return [
        (ri, vi)
        for ri, ring in enumerate(poly.rings)
        for vi in range(len(ring))
        if is_reflex(poly, ri, vi)
    ]


def rotate_points(points, angle: float) -> np.ndarray:
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    c, s = math.cos(angle), math.sin(angle)
    return np.column_stack([c * pts[:, 0] - s * pts[:, 1], s * pts[:, 0] + c * pts[:, 1]])


def rotate_frame(poly: PolygonWithHoles, direction: float) -> PolygonWithHoles:
    """Rotate so that ``direction`` maps onto the +X axis."""
    return poly.transformed(-direction)


def unrotate_frame(poly: PolygonWithHoles, direction: float) -> PolygonWithHoles:
    return poly.transformed(direction)


def crossing_x(edges: np.ndarray, y: float) -> np.ndarray:
    """Sorted x-coordinates where the horizontal line at ``y`` crosses ``edges``.

    A vertex lying exactly on the line is treated as lying just below it, so
    every closed ring contributes an even number of crossings.
    """
    ya = edges[:, 0, 1]
    yb = edges[:, 1, 1]
    mask = (ya <= y) != (yb <= y)
    if not mask.any():
        return np.zeros(0)
    e = edges[mask]
    xa, ya, xb, yb = e[:, 0, 0], e[:, 0, 1], e[:, 1, 0], e[:, 1, 1]
    return np.sort(xa + (y - ya) * (xb - xa) / (yb - ya))


def sweep_intersections(poly: PolygonWithHoles, y: float) -> list:
    """Inside-intervals of the horizontal line at height ``y``, sorted by x."""
    xs = crossing_x(poly.edges, y)
    out = []
    for lo, hi in zip(xs[0::2], xs[1::2]):
        if hi > lo:
            out.append((float(lo), float(hi)))
    return out


def slice_counts(ya: np.ndarray, yb: np.ndarray, ys) -> np.ndarray:
    """Number of inside-intervals of horizontal lines at each of ``ys``.

    ``ya``/``yb`` are the endpoint heights of all boundary edges.
    """
    y = np.asarray(ys, dtype=float)[:, None]
    crossings = ((ya[None, :] <= y) != (yb[None, :] <= y)).sum(axis=1)
    return crossings // 2


def _half_plane(origin: Point, angle: float, side: int, reach: float) -> ShapelyPolygon:
    dx, dy = math.cos(angle), math.sin(angle)
    nx, ny = -dy * side, dx * side
    ox, oy = origin
    return ShapelyPolygon(
        [
            (ox - dx * reach, oy - dy * reach),
            (ox + dx * reach, oy + dy * reach),
            (ox + dx * reach + nx * reach, oy + dy * reach + ny * reach),
            (ox - dx * reach + nx * reach, oy - dy * reach + ny * reach),
        ]
    )


def _polygons_of(geom) -> list:
    if geom.is_empty:
        return []
    if isinstance(geom, ShapelyPolygon):
        return [geom]
    if isinstance(geom, MultiPolygon):
        return list(geom.geoms)
    return [g for g in getattr(geom, "geoms", []) if isinstance(g, ShapelyPolygon)]


def split_by_line(poly: PolygonWithHoles, origin, angle: float) -> list:
    """Cut ``poly`` by the infinite line through ``origin`` with orientation ``angle``.

    Returns the connected pieces on both sides, or ``[poly]`` when the line
    does not pass through the interior.
    """
    origin = Point(*origin)
    x0, y0, x1, y1 = poly.bounds
    reach = 2.0 * (math.hypot(x1 - x0, y1 - y0) + math.hypot(origin.x - x0, origin.y - y0)) + 1.0
    shp = poly.to_shapely()
    min_area = EPS_AREA_REL * poly.area * 1e-3
    pieces = []
    for side in (1, -1):
        part = shp.intersection(_half_plane(origin, angle, side, reach))
        for g in _polygons_of(part):
            if g.area > min_area:
                piece = PolygonWithHoles.from_shapely(g, min_hole_area=min_area)
                if len(piece.outer) >= 3:
                    pieces.append(piece)
    if len(pieces) <= 1:
        return [poly]
    return pieces


def _bbox_gap(a: PolygonWithHoles, b: PolygonWithHoles) -> float:
    ax0, ay0, ax1, ay1 = a.bounds
    bx0, by0, bx1, by1 = b.bounds
    return max(bx0 - ax1, ax0 - bx1, by0 - ay1, ay0 - by1)


def shared_boundary(a: PolygonWithHoles, b: PolygonWithHoles, tol: float = EPS_GEOM) -> list:
    """Boundary pieces of positive length common to ``a`` and ``b``."""
    if _bbox_gap(a, b) > tol:
        return []
    near = a.to_shapely().boundary.intersection(b.to_shapely().boundary.buffer(tol, quad_segs=2))
    if near.is_empty:
        return []
    lines = [g for g in getattr(near, "geoms", [near]) if isinstance(g, LineString)]
    lines = [g for g in lines if g.length > 4 * tol]
    if not lines:
        return []
    merged = shapely.line_merge(shapely.MultiLineString(lines)) if len(lines) > 1 else lines[0]
    out = []
    for line in getattr(merged, "geoms", [merged]):
        coords = _clean_ring(line.coords, drop_collinear=False)
        if len(coords) < 2:
            continue
        # keep the polyline as straight pieces; drop interior collinear joints
        run = [coords[0]]
        for p in coords[1:]:
            if len(run) >= 2:
                a0, a1 = run[-2], run[-1]
                cross = (a1.x - a0.x) * (p.y - a1.y) - (a1.y - a0.y) * (p.x - a1.x)
                if abs(cross) <= 1e-9 * max(1.0, Segment(a0, a1).length * math.hypot(p.x - a1.x, p.y - a1.y)):
                    run[-1] = p
                    continue
            run.append(p)
        out.extend(Segment(p, q) for p, q in zip(run, run[1:]) if Segment(p, q).length > 10 * tol)
    return out


def union_pair(a: PolygonWithHoles, b: PolygonWithHoles) -> PolygonWithHoles:
    """Union of two cells that share a boundary piece of positive length."""
    if not shared_boundary(a, b):
        raise NotAdjacent("polygons do not share a boundary segment")
    sa = a.to_shapely()
    sb = shapely.snap(b.to_shapely(), sa, 10 * EPS_GEOM)
    u = shapely.union(sa, sb)
    parts = _polygons_of(u)
    if len(parts) != 1:
        # hairline gaps from rounding: close them with a mitred grow-and-shrink
        eps = 10 * EPS_GEOM
        u = shapely.union(sa.buffer(eps, join_style="mitre"), sb.buffer(eps, join_style="mitre"))
        parts = _polygons_of(u.buffer(-eps, join_style="mitre"))
    if len(parts) != 1:
        raise NotAdjacent(f"union is not connected ({len(parts)} parts)")
    total = a.area + b.area
    return PolygonWithHoles.from_shapely(parts[0], min_hole_area=EPS_AREA_REL * total)


# -- free-space segment tests -------------------------------------------------


def _sign(v: np.ndarray, tol) -> np.ndarray:
    return np.where(v > tol, 1, np.where(v < -tol, -1, 0))


def _points_in_rings(pts: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Crossing-number parity of ``pts`` against the closed rings in ``edges``."""
    px = pts[:, 0][:, None]
    py = pts[:, 1][:, None]
    xa, ya, xb, yb = edges[:, 0, 0], edges[:, 0, 1], edges[:, 1, 0], edges[:, 1, 1]
    straddle = (ya > py) != (yb > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        xc = xa + (py - ya) * (xb - xa) / (yb - ya)
    hits = straddle & (px < xc)
    return (hits.sum(axis=1) % 2) == 1


def _dist_to_edges(pts: np.ndarray, edges: np.ndarray) -> np.ndarray:
    a = edges[None, :, 0, :]
    d = edges[None, :, 1, :] - a
    w = pts[:, None, :] - a
    dd = (d * d).sum(axis=2)
    t = np.clip(np.where(dd > 0, (w * d).sum(axis=2) / np.where(dd > 0, dd, 1.0), 0.0), 0.0, 1.0)
    diff = w - t[..., None] * d
    return np.sqrt((diff * diff).sum(axis=2))


def points_in_closure(env: PolygonWithHoles, pts, fly_over_holes: bool = False, tol: float = EPS_GEOM) -> np.ndarray:
    """Vectorised membership test for the closed free workspace."""
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    outer = env.outer_edges
    inside = _points_in_rings(pts, outer)
    # distances only matter where parity alone could be wrong about the boundary
    near = np.nonzero(~inside)[0]
    if len(near):
        inside[near] = _dist_to_edges(pts[near], outer).min(axis=1) <= tol
    if fly_over_holes or not env.holes:
        return inside
    hole_edges = env.hole_edges
    in_hole = _points_in_rings(pts, hole_edges) & inside
    near = np.nonzero(in_hole)[0]
    if len(near):
        in_hole[near] = _dist_to_edges(pts[near], hole_edges).min(axis=1) > tol
    return inside & ~in_hole


def segments_in_free_space(
    env: PolygonWithHoles, origin, targets, fly_over_holes: bool = False, tol: float = EPS_GEOM
) -> np.ndarray:
    """For each target, whether the segment ``origin -> target`` stays in free space.

    A segment is accepted iff it properly crosses no obstacle edge and every
    sub-piece between boundary vertices lying on it has its midpoint in the
    closed free workspace.  Grazing the boundary is allowed.
    """
    p = np.asarray(origin, dtype=float)
    tg = np.asarray(targets, dtype=float).reshape(-1, 2)
    k = len(tg)
    if k == 0:
        return np.zeros(0, dtype=bool)
    edges = env.outer_edges if fly_over_holes else env.edges
    verts = np.asarray(env.outer if fly_over_holes else env.vertices, dtype=float)

    d = tg - p
    length = np.hypot(d[:, 0], d[:, 1])
    ok = np.ones(k, dtype=bool)
    degenerate = length <= tol

    a = edges[:, 0, :]
    b = edges[:, 1, :]
    e = b - a
    elen = np.hypot(e[:, 0], e[:, 1])
    seg_tol = tol * length[:, None]
    o1 = d[:, 0:1] * (a[None, :, 1] - p[1]) - d[:, 1:2] * (a[None, :, 0] - p[0])
    o2 = d[:, 0:1] * (b[None, :, 1] - p[1]) - d[:, 1:2] * (b[None, :, 0] - p[0])
    o3 = e[None, :, 0] * (p[1] - a[None, :, 1]) - e[None, :, 1] * (p[0] - a[None, :, 0])
    o4 = e[None, :, 0] * (tg[:, 1:2] - a[None, :, 1]) - e[None, :, 1] * (tg[:, 0:1] - a[None, :, 0])
    edge_tol = tol * elen[None, :]
    proper = (_sign(o1, seg_tol) * _sign(o2, seg_tol) < 0) & (_sign(o3, edge_tol) * _sign(o4, edge_tol) < 0)
    ok &= ~proper.any(axis=1)

    # boundary vertices lying strictly inside the segment split it into pieces
    wv = verts[None, :, :] - p
    ow = d[:, 0:1] * wv[:, :, 1] - d[:, 1:2] * wv[:, :, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (wv[:, :, 0] * d[:, 0:1] + wv[:, :, 1] * d[:, 1:2]) / (length[:, None] ** 2)
        t_tol = tol / length[:, None]
    on = (np.abs(ow) <= seg_tol) & (t > t_tol) & (t < 1 - t_tol)
    has_on = on.any(axis=1)

    simple = ok & ~has_on & ~degenerate
    if simple.any():
        mids = p + 0.5 * d[simple]
        ok[simple] = points_in_closure(env, mids, fly_over_holes, tol)

    split = np.nonzero(ok & has_on & ~degenerate)[0]
    if len(split):
        owners, mids = [], []
        for i in split:
            ts = np.concatenate([[0.0], np.sort(t[i, on[i]]), [1.0]])
            mids_t = 0.5 * (ts[:-1] + ts[1:])
            mids_t = mids_t[(ts[1:] - ts[:-1]) * length[i] > tol]
            owners.append(np.full(len(mids_t), i))
            mids.append(p + mids_t[:, None] * d[i])
        owners = np.concatenate(owners)
        inside = points_in_closure(env, np.concatenate(mids), fly_over_holes, tol)
        bad = owners[~inside]
        ok[bad] = False
    ok[degenerate] = bool(points_in_closure(env, p[None, :], fly_over_holes, tol)[0])
    return ok


def segment_in_free_space(env: PolygonWithHoles, seg: Segment, fly_over_holes: bool = False) -> bool:
    return bool(segments_in_free_space(env, seg.a, [seg.b], fly_over_holes)[0])
