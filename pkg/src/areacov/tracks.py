"""Service-track generation for decomposed cells.

Each cell is swept in its own frame (service direction along +X) by a line
that advances one field-of-view width per step.  Besides the usual
back-and-forth tracks the sweep emits two kinds of edge tracks that a plain
boustrophedon pattern misses:

* ``scenario1_edge`` - an edge passed over entirely between two sweep lines
  and not inside the footprint of the neighbouring tracks;
* ``scenario2_edge`` - an edge crossing the sweep line at less than 45 degrees
  to the service direction.

Footprints are square, ``fov`` wide, aligned with the track.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import shapely

from .errors import InvalidParameter
from .geometry import (
    EPS_ANG,
    EPS_GEOM,
    Point,
    PolygonWithHoles,
    Segment,
    angle_between,
    normalize_angle,
    rotate_frame,
    rotate_points,
    sweep_intersections,
)

TRACK_KINDS = ("sweep", "scenario1_edge", "scenario2_edge", "boundary")


@dataclass(frozen=True)
class ServiceTrack:
    segment: Segment
    source_cell: int
    kind: str
    direction: float

    @property
    def length(self) -> float:
        return self.segment.length


@dataclass
class SweepState:
    pending: list  # edges (lower, upper) sorted by lower height
    current: list = field(default_factory=list)
    special: list = field(default_factory=list)
    offset: float = 0.0
    fov: float = 1.0
    next_pending: int = 0

    @property
    def exhausted(self) -> bool:
        return self.next_pending >= len(self.pending)

    @property
    def done(self) -> bool:
        return self.exhausted and not self.current and not self.special


def edge_angle_below_quarter_pi(seg: Segment, direction: float) -> bool:
    return angle_between(seg.angle, direction) < math.pi / 4 - EPS_ANG


def _footprint_mask(pts: np.ndarray, seg: Segment, fov: float, tol: float = 1e-9) -> np.ndarray:
    ax, ay = seg.a
    dx, dy = seg.b.x - ax, seg.b.y - ay
    length = math.hypot(dx, dy)
    if length <= 0:
        ux, uy = 1.0, 0.0
    else:
        ux, uy = dx / length, dy / length
    rx = pts[:, 0] - ax
    ry = pts[:, 1] - ay
    along = rx * ux + ry * uy
    perp = -rx * uy + ry * ux
    half = 0.5 * fov + tol
    return (along >= -half) & (along <= length + half) & (np.abs(perp) <= half)


def within_fov(e: Segment, tracks, fov: float) -> bool:
    """Whether every point of ``e`` lies in the square footprint of some track."""
    if not tracks:
        return False
    n = max(8, math.ceil(e.length / (fov / 8.0))) + 1
    t = np.linspace(0.0, 1.0, n)
    pts = np.column_stack([e.a.x + t * (e.b.x - e.a.x), e.a.y + t * (e.b.y - e.a.y)])
    covered = np.zeros(n, dtype=bool)
    for tr in tracks:
        seg = tr.segment if isinstance(tr, ServiceTrack) else tr
        covered |= _footprint_mask(pts, seg, fov)
        if covered.all():
            return True
    return False


def _to_world(seg: Segment, direction: float) -> Segment:
    p = rotate_points([seg.a, seg.b], direction)
    return Segment(Point(float(p[0, 0]), float(p[0, 1])), Point(float(p[1, 0]), float(p[1, 1])))


def generate_tracks(cell, fov: float, cell_id: int = 0) -> list:
    """Service tracks of one cell, in world coordinates."""
    if not fov > 0:
        raise InvalidParameter(f"field of view must be positive, got {fov}")
    direction = cell.service_direction
    rot = rotate_frame(cell.shape, direction)
    edges = []
    for a, b in rot.edges:
        pa, pb = Point(float(a[0]), float(a[1])), Point(float(b[0]), float(b[1]))
        if pa.y > pb.y or (pa.y == pb.y and pa.x > pb.x):
            pa, pb = pb, pa
        if Segment(pa, pb).length > EPS_GEOM:
            edges.append(Segment(pa, pb))
    edges.sort(key=lambda s: s.a.y)
    if not edges:
        return []

    y_lo = edges[0].a.y
    y_hi = max(s.b.y for s in edges)
    state = SweepState(pending=edges, fov=fov, offset=y_lo + fov / 2)
    if y_hi - y_lo < fov:
        # thin cell: one pass at mid-height covers it
        state.offset = 0.5 * (y_lo + y_hi)

    out: list = []  # (rotated segment, kind)
    previous: list = []
    while not state.done:
        o = state.offset
        step: list = []
        # move every edge whose lower end has been reached
        while not state.exhausted and state.pending[state.next_pending].a.y <= o:
            e = state.pending[state.next_pending]
            state.next_pending += 1
            if e.b.y <= o:
                state.special.append(e)
            else:
                state.current.append(e)
                if edge_angle_below_quarter_pi(e, 0.0):
                    step.append((e, "scenario2_edge"))
        state.current = [e for e in state.current if e.b.y > o]

        xs = sorted(e.a.x + (o - e.a.y) * (e.b.x - e.a.x) / (e.b.y - e.a.y) for e in state.current)
        for lo, hi in zip(xs[0::2], xs[1::2]):
            if hi - lo > EPS_GEOM:
                step.append((Segment(Point(lo, o), Point(hi, o)), "sweep"))

        nearby = [s for s, _ in step] + previous
        for e in state.special:
            if not within_fov(e, nearby, fov):
                step.append((e, "scenario1_edge"))
        state.special = []

        out.extend(step)
        previous = [s for s, _ in step]
        state.offset = o + fov

    tracks = []
    for seg, kind in out:
        world = _to_world(seg, direction)
        nominal = direction if kind == "sweep" else world.angle
        tracks.append(ServiceTrack(world, cell_id, kind, nominal))
    return tracks


def boustrophedon_tracks(shape: PolygonWithHoles, direction: float, fov: float, cell_id: int = 0) -> list:
    """Plain lawn-mower tracks: sweep intervals only, no edge tracks.

    Baseline used to show where the full generator adds coverage.
    """
    rot = rotate_frame(shape, direction)
    _, y_lo, _, y_hi = rot.bounds
    tracks = []
    o = y_lo + fov / 2
    while o < y_hi:
        for lo, hi in sweep_intersections(rot, o):
            if hi - lo > EPS_GEOM:
                seg = _to_world(Segment(Point(lo, o), Point(hi, o)), direction)
                tracks.append(ServiceTrack(seg, cell_id, "sweep", direction))
        o += fov
    return tracks


def boundary_tracks(env: PolygonWithHoles) -> list:
    out = []
    for ring in env.rings:
        for i, a in enumerate(ring):
            seg = Segment(a, ring[(i + 1) % len(ring)])
            if seg.length > EPS_GEOM:
                out.append(ServiceTrack(seg, -1, "boundary", seg.angle))
    return out


def _line_key(seg: Segment):
    theta = normalize_angle(math.atan2(seg.b.y - seg.a.y, seg.b.x - seg.a.x))
    if theta > math.pi - 1e-4:
        theta -= math.pi
    return theta


def _cluster(values, order, tol):
    groups = []
    prev = None
    for i in order:
        if prev is None or values[i] - prev > tol:
            groups.append([])
        groups[-1].append(i)
        prev = values[i]
    return groups


def remove_overlaps(tracks) -> list:
    """Trim collinear overlaps; earlier tracks win, later ones are cut or split."""
    tracks = list(tracks)
    if not tracks:
        return []
    thetas = [_line_key(t.segment) for t in tracks]
    pieces: dict = {i: [t] for i, t in enumerate(tracks)}
    for group in _cluster(thetas, sorted(range(len(tracks)), key=lambda i: thetas[i]), EPS_ANG):
        ref = thetas[group[0]]
        c, s = math.cos(ref), math.sin(ref)
        offsets = {i: -s * tracks[i].segment.a.x + c * tracks[i].segment.a.y for i in group}
        for line in _cluster(offsets, sorted(group, key=lambda i: offsets[i]), EPS_GEOM):
            if len(line) < 2:
                continue
            covered: list = []
            for i in sorted(line):
                seg = tracks[i].segment
                sa = c * seg.a.x + s * seg.a.y
                sb = c * seg.b.x + s * seg.b.y
                lo, hi = min(sa, sb), max(sa, sb)
                free = [(lo, hi)]
                for clo, chi in covered:
                    nxt = []
                    for flo, fhi in free:
                        if chi <= flo or clo >= fhi:
                            nxt.append((flo, fhi))
                            continue
                        if clo > flo:
                            nxt.append((flo, clo))
                        if chi < fhi:
                            nxt.append((chi, fhi))
                    free = nxt
                free = [(a, b) for a, b in free if b - a > EPS_GEOM]
                if free == [(lo, hi)]:
                    kept = [tracks[i]]
                else:
                    kept = []
                    for a, b in free:
                        ta, tb = (a - sa) / (sb - sa), (b - sa) / (sb - sa)
                        if ta > tb:
                            ta, tb = tb, ta
                        pa = Point(seg.a.x + ta * (seg.b.x - seg.a.x), seg.a.y + ta * (seg.b.y - seg.a.y))
                        pb = Point(seg.a.x + tb * (seg.b.x - seg.a.x), seg.a.y + tb * (seg.b.y - seg.a.y))
                        kept.append(ServiceTrack(Segment(pa, pb), tracks[i].source_cell, tracks[i].kind, tracks[i].direction))
                pieces[i] = kept
                covered.extend(free)
    return [p for i in range(len(tracks)) for p in pieces[i]]


def generate_all_tracks(cells, fov: float, env: PolygonWithHoles | None = None, include_boundary: bool = False) -> list:
    tracks = []
    for i, cell in enumerate(cells):
        tracks.extend(generate_tracks(cell, fov, i))
    if include_boundary:
        if env is None:
            raise InvalidParameter("boundary tracks need the environment")
        tracks.extend(boundary_tracks(env))
    return remove_overlaps(tracks)


def sample_free_points(env: PolygonWithHoles, n: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    x0, y0, x1, y1 = env.bounds
    shp = env.to_shapely()
    shapely.prepare(shp)
    got = []
    total = 0
    frac = max(env.area / ((x1 - x0) * (y1 - y0)), 1e-3)
    while total < n:
        m = int((n - total) / frac * 1.2) + 64
        xs = rng.uniform(x0, x1, m)
        ys = rng.uniform(y0, y1, m)
        keep = shapely.contains_xy(shp, xs, ys)
        pts = np.column_stack([xs[keep], ys[keep]])
        got.append(pts)
        total += len(pts)
    return np.concatenate(got)[:n]


def coverage_fraction(env: PolygonWithHoles, tracks, fov: float, samples: int = 100_000, seed: int = 0) -> float:
    """Monte-Carlo fraction of the free workspace inside some track footprint."""
    if not fov > 0:
        raise InvalidParameter(f"field of view must be positive, got {fov}")
    if not tracks:
        return 0.0
    pts = sample_free_points(env, samples, seed)
    covered = np.zeros(len(pts), dtype=bool)
    for tr in tracks:
        idx = np.nonzero(~covered)[0]
        if len(idx) == 0:
            break
        seg = tr.segment if isinstance(tr, ServiceTrack) else tr
        covered[idx] |= _footprint_mask(pts[idx], seg, fov)
    return float(covered.mean())
