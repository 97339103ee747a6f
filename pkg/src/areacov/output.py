"""GeoJSON and SVG writers."""
from __future__ import annotations

import json
import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .costs import SERVICE
from .errors import IoError

PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
    "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f",
)


def _write(path, text: str) -> None:
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise IoError(f"{path}: cannot write ({exc.strerror or exc})") from exc


def step_runs(route) -> list:
    """Maximal runs of consecutive steps sharing a mode."""
    runs = []
    for s in route.steps:
        if runs and runs[-1][0] == s.mode and runs[-1][1][-1].v == s.u:
            runs[-1][1].append(s)
        else:
            runs.append((s.mode, [s]))
    return runs


def solution_geojson(sol, points) -> dict:
    pts = np.asarray(points, dtype=float)
    feats = []
    for k, r in enumerate(sol.routes):
        for mode, steps in step_runs(r):
            coords = [pts[steps[0].u].tolist()] + [pts[s.v].tolist() for s in steps]
            feats.append({
                "type": "Feature",
                "geometry": {"type": "LineString", "coordinates": coords},
                "properties": {
                    "route_id": k,
                    "mode": mode,
                    "cost": math.fsum(s.cost for s in steps),
                    "demand": math.fsum(s.demand for s in steps),
                },
            })
    return {"type": "FeatureCollection", "features": feats}


def emit_geojson(sol, path, points=None) -> None:
    if points is None:
        points = np.zeros((0, 2))
    _write(path, json.dumps(solution_geojson(sol, points), indent=1))


def _fmt(v: float) -> str:
    return f"{v:.4f}".rstrip("0").rstrip(".")


class _Canvas:
    def __init__(self, bounds, width: float = 800.0, margin: float = 20.0):
        x0, y0, x1, y1 = bounds
        span = max(x1 - x0, y1 - y0, 1e-9)
        self.s = (width - 2 * margin) / span
        self.x0, self.y1, self.m = x0, y1, margin
        self.w = (x1 - x0) * self.s + 2 * margin
        self.h = (y1 - y0) * self.s + 2 * margin
        self.items: list = []

    def xy(self, p) -> str:
        # SVG y grows downwards
        return f"{_fmt((p[0] - self.x0) * self.s + self.m)},{_fmt((self.y1 - p[1]) * self.s + self.m)}"

    def ring(self, ring) -> str:
        return "M" + " L".join(self.xy(p) for p in ring) + " Z"

    def add(self, s: str) -> None:
        self.items.append(s)

    def render(self) -> str:
        head = (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(self.w)}" height="{_fmt(self.h)}" '
            f'viewBox="0 0 {_fmt(self.w)} {_fmt(self.h)}">\n'
            "<defs>\n"
            '<marker id="arrow" viewBox="0 0 10 10" refX="9" refY="5" markerWidth="6" markerHeight="6" '
            'orient="auto-start-reverse"><path d="M0,0 L10,5 L0,10 z" fill="#555"/></marker>\n'
            "</defs>\n"
        )
        return head + "\n".join(self.items) + "\n</svg>\n"


def render_svg(env, cells=(), tracks=(), sol=None, points=None) -> str:
    cv = _Canvas(env.bounds)
    body = cv.ring(env.outer) + "".join(" " + cv.ring(h) for h in env.holes)
    cv.add(f'<path class="environment" d="{body}" fill="#f7f7f7" fill-rule="evenodd" stroke="#000" stroke-width="1.5"/>')
    for h in env.holes:
        cv.add(f'<path class="hole" d="{cv.ring(h)}" fill="#bbb" stroke="#000"/>')
    for i, c in enumerate(cells):
        shp = c.shape
        d = cv.ring(shp.outer) + "".join(" " + cv.ring(h) for h in shp.holes)
        cv.add(f'<path class="cell" id="cell-{i}" d="{d}" fill="none" fill-rule="evenodd" stroke="#999" stroke-dasharray="2,2"/>')
        poly = shp.to_shapely()
        cx, cy = poly.representative_point().coords[0]
        x0, y0, x1, y1 = shp.bounds
        half = 0.15 * min(x1 - x0, y1 - y0) + 1e-9
        ux, uy = math.cos(c.service_direction), math.sin(c.service_direction)
        a, b = (cx - half * ux, cy - half * uy), (cx + half * ux, cy + half * uy)
        cv.add(f'<path class="direction" d="M{cv.xy(a)} L{cv.xy(b)}" stroke="#555" stroke-width="1.2" '
               f'marker-start="url(#arrow)" marker-end="url(#arrow)"/>')
    if sol is None:
        for t in tracks:
            seg = t.segment
            cv.add(f'<path class="track" d="M{cv.xy(seg.a)} L{cv.xy(seg.b)}" stroke="#1f77b4" stroke-width="1.5"/>')
    else:
        pts = np.asarray(points, dtype=float)
        for k, r in enumerate(sol.routes):
            color = PALETTE[k % len(PALETTE)]
            for mode, steps in step_runs(r):
                d = "M" + cv.xy(pts[steps[0].u]) + "".join(" L" + cv.xy(pts[s.v]) for s in steps)
                style = 'stroke-width="1.5"' if mode == SERVICE else 'stroke-width="1" stroke-dasharray="5,4"'
                cv.add(f'<path class="{escape(mode)}" data-route="{k}" d="{d}" fill="none" stroke="{color}" {style}/>')
    return cv.render()


def emit_svg(env, cells, tracks, sol, path, points=None) -> None:
    _write(path, render_svg(env, cells, tracks, sol, points))
