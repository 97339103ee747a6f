"""Environment files: the native JSON schema, GeoJSON, and dataset conversion.

Native schema::

    {"outer": [[x, y], ...], "holes": [[[x, y], ...], ...]}
"""
from __future__ import annotations

import json
import math
import re
from pathlib import Path

import shapely
import shapely.wkt
import yaml

from .errors import FormatError, GeometryError, InvalidRing
from .geometry import PolygonWithHoles

DATASET_KINDS = ("indoor25", "outdoor300")

DATASET_CONFIGS = {
    "indoor25": {"fov": 0.1, "cost": "length", "include_boundary": True,
                 "capacity": "inf", "capacities": ["inf"]},
    "outdoor300": {"fov": 3.0, "cost": "ramp", "vmax": 3.0, "amax": 1.0, "include_boundary": False,
                   "capacity": "inf", "capacities": ["inf", 1200.0]},
}


def _ring(coords, where: str) -> list:
    try:
        pts = [(float(p[0]), float(p[1])) for p in coords]
    except (TypeError, ValueError, IndexError) as exc:
        raise FormatError(f"{where}: expected a list of [x, y] pairs ({exc})") from exc
    if len(pts) > 1 and pts[0] == pts[-1]:
        pts = pts[:-1]
    return pts


def _from_geojson(data: dict, where: str) -> tuple:
    kind = data.get("type")
    if kind == "FeatureCollection":
        feats = [f for f in data.get("features", []) if (f.get("geometry") or {}).get("type") in ("Polygon", "MultiPolygon")]
        if not feats:
            raise FormatError(f"{where}: FeatureCollection has no Polygon feature")
        return _from_geojson(feats[0]["geometry"], where)
    if kind == "Feature":
        return _from_geojson(data.get("geometry") or {}, where)
    if kind == "MultiPolygon":
        polys = data.get("coordinates") or []
        if len(polys) != 1:
            raise FormatError(f"{where}: MultiPolygon with {len(polys)} parts; expected exactly one")
        data = {"type": "Polygon", "coordinates": polys[0]}
        kind = "Polygon"
    if kind != "Polygon":
        raise FormatError(f"{where}: unsupported GeoJSON type {kind!r}")
    rings = data.get("coordinates") or []
    if not rings:
        raise FormatError(f"{where}: Polygon without coordinates")
    return _ring(rings[0], f"{where}: exterior"), [_ring(r, f"{where}: interior {k}") for k, r in enumerate(rings[1:])]


def _from_mapping(data, where: str) -> tuple:
    if not isinstance(data, dict):
        raise FormatError(f"{where}: expected an object at the top level")
    if "type" in data:
        return _from_geojson(data, where)
    for key in ("outer", "hull", "boundary", "polygon"):
        if key in data:
            outer = _ring(data[key], f"{where}: {key}")
            break
    else:
        raise FormatError(f"{where}: missing 'outer' ring")
    holes_raw = data.get("holes", data.get("obstacles", [])) or []
    return outer, [_ring(h, f"{where}: hole {k}") for k, h in enumerate(holes_raw)]


def _build(outer, holes, where: str) -> PolygonWithHoles:
    try:
        return PolygonWithHoles.from_coords(outer, holes)
    except InvalidRing as exc:
        raise InvalidRing(f"{where}: {exc}") from exc
    except GeometryError as exc:
        raise GeometryError(f"{where}: {exc}") from exc


def parse_environment(text: str, where: str = "<string>") -> PolygonWithHoles:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{where}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    outer, holes = _from_mapping(data, where)
    return _build(outer, holes, where)


def load_environment(path) -> PolygonWithHoles:
    """Read a native JSON or GeoJSON environment file."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise FormatError(f"{p}: cannot read ({exc.strerror or exc})") from exc
    return parse_environment(text, str(p))


def environment_to_dict(env: PolygonWithHoles) -> dict:
    return {
        "outer": [[x, y] for x, y in env.outer],
        "holes": [[[x, y] for x, y in h] for h in env.holes],
    }


def save_environment(env: PolygonWithHoles, path) -> None:
    Path(path).write_text(json.dumps(environment_to_dict(env), indent=1))


# dataset conversion ---------------------------------------------------------

_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_PAIR = re.compile(rf"^\s*\(?\s*({_NUM})\s*[,\s;]\s*({_NUM})\s*\)?\s*[,;]?\s*$")


def _parse_text_rings(text: str, where: str) -> tuple:
    """Blocks of 'x y' lines separated by blank lines; the first block is the outer ring.

    Lines starting with '#' and headers such as 'outer' or 'hole 3' are skipped.
    """
    rings, cur = [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s.startswith("#") or re.fullmatch(r"[A-Za-z_]+\s*\d*\s*:?", s):
            if cur:
                rings.append(cur)
                cur = []
            continue
        m = _PAIR.match(s)
        if not m:
            raise FormatError(f"{where}: line {lineno}: unrecognised content {s[:60]!r}")
        cur.append((float(m.group(1)), float(m.group(2))))
    if cur:
        rings.append(cur)
    if not rings:
        raise FormatError(f"{where}: no coordinates found")
    return rings[0], rings[1:]


def _parse_any(path: Path) -> PolygonWithHoles:
    where = str(path)
    try:
        text = path.read_text()
    except (OSError, UnicodeDecodeError) as exc:
        raise FormatError(f"{where}: cannot read ({exc})") from exc
    suffix = path.suffix.lower()
    stripped = text.lstrip()
    if suffix in (".json", ".geojson") or stripped.startswith("{"):
        return parse_environment(text, where)
    if suffix == ".wkt" or re.match(r"(?i)(multi)?polygon\s*\(", stripped):
        try:
            geom = shapely.wkt.loads(text)
        except shapely.errors.ShapelyError as exc:
            raise FormatError(f"{where}: line 1: invalid WKT ({exc})") from exc
        outer, holes = _from_geojson(shapely.geometry.mapping(geom), where)
        return _build(outer, holes, where)
    if suffix in (".yaml", ".yml"):
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            line = mark.line + 1 if mark else 1
            raise FormatError(f"{where}: line {line}: invalid YAML") from exc
        outer, holes = _from_mapping(data, where)
        return _build(outer, holes, where)
    outer, holes = _parse_text_rings(text, where)
    return _build(outer, holes, where)


def convert_dataset(path, kind: str, out_dir=None) -> list:
    """Convert every instance under ``path`` to native JSON plus a per-instance config.

    Returns ``[(env_path, config_dict), ...]``.  Files are written to
    ``out_dir`` (default: ``<path>_converted``).
    """
    if kind not in DATASET_KINDS:
        raise FormatError(f"unknown dataset kind {kind!r}; expected one of {DATASET_KINDS}")
    src = Path(path)
    if not src.exists():
        raise FormatError(f"{src}: no such file or directory")
    files = sorted(f for f in src.rglob("*") if f.is_file() and not f.name.startswith(".")) if src.is_dir() else [src]
    if not files:
        raise FormatError(f"{src}: no instance files")
    out = Path(out_dir) if out_dir is not None else src.with_name(src.stem + "_converted")
    out.mkdir(parents=True, exist_ok=True)
    results = []
    for f in files:
        env = _parse_any(f)
        name = f.stem if src.is_file() else "_".join(f.relative_to(src).with_suffix("").parts)
        env_path = out / f"{name}.json"
        save_environment(env, env_path)
        cfg = dict(DATASET_CONFIGS[kind])
        cfg["env"] = str(env_path)
        cfg["depot"] = list(env.outer[0])
        cfg_path = out / f"{name}.config.json"
        cfg_path.write_text(json.dumps(cfg, indent=1))
        results.append((env_path, cfg))
    return results


def parse_capacity(value) -> float:
    if isinstance(value, str) and value.strip().lower() in ("inf", "infinity", "unbounded"):
        return math.inf
    return float(value)
