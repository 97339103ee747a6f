import json
import math
from pathlib import Path

import numpy as np
import pytest

from areacov.cli import exit_code, main
from areacov.errors import FormatError, GeometryError, InvalidParameter, IoError
from areacov.formats import convert_dataset, load_environment, save_environment
from areacov.graph import shortest_deadheads
from areacov.mem import init_routes
from areacov.output import emit_geojson, render_svg
from areacov.pipeline import PlanConfig, plan, run
from envs import rect, square, square_with_hole


def write(tmp_path, name, data):
    p = tmp_path / name
    p.write_text(json.dumps(data) if not isinstance(data, str) else data)
    return p


@pytest.fixture
def unit_env(tmp_path):
    return write(tmp_path, "unit.json", {"outer": [[0, 0], [1, 0], [1, 1], [0, 1]], "holes": []})


def test_load_environment_examples(tmp_path, unit_env):
    env = load_environment(unit_env)
    assert env.area == pytest.approx(1.0) and env.holes == ()
    gj = {"type": "Polygon", "coordinates": [rect(0, 0, 4, 4) + [(0, 0)], rect(1, 1, 2, 2, cw=True) + [(1, 1)]]}
    env = load_environment(write(tmp_path, "h.geojson", gj))
    assert len(env.holes) == 1 and env.area == pytest.approx(15.0)
    with pytest.raises(GeometryError):
        load_environment(write(tmp_path, "bow.json", {"outer": [[0, 0], [1, 1], [1, 0], [0, 1]]}))
    with pytest.raises(FormatError) as exc:
        load_environment(write(tmp_path, "bad.json", '{"outer": [[0, 0], [1, 0]\n  [1, 1]]}'))
    assert "line 2" in str(exc.value)
    with pytest.raises(FormatError):
        load_environment(tmp_path / "missing.json")


def test_plan_unit_square():
    sol, rep = plan(PlanConfig(fov=0.5, depot=(0, 0)), env=square())
    assert len(sol.routes) == 1
    assert sorted(s.edge for s in sol.routes[0].steps if s.mode == "service") == [0, 1]
    assert rep.coverage >= 0.999
    assert rep.totals["routes"] == 1 and rep.totals["cost"] == pytest.approx(3.5)


def single_track_capacity(env, fov):
    res = run(PlanConfig(fov=fov, depot=(0, 0), coverage_samples=0), env=env)
    return max(r.total_demand for r in init_routes(res.graph, shortest_deadheads(res.graph)))


def test_plan_capacity_split():
    q = single_track_capacity(square(), 0.5)
    sol, rep = plan(PlanConfig(fov=0.5, depot=(0, 0), capacity=q), env=square())
    assert len(sol.routes) == 2
    assert all(d <= q for d in sol.route_demands)


def test_plan_outdoor_style_capacity():
    env = load_environment_dict({"outer": rect(0, 0, 100, 100), "holes": [rect(40, 30, 60, 55, cw=True)]})
    sol, rep = plan(PlanConfig(fov=3.0, cost="ramp", vmax=3, amax=1, capacity=1200, depot=(0, 0),
                               coverage_samples=0), env=env)
    assert len(sol.routes) >= 2
    assert all(d <= 1200 for d in sol.route_demands)
    assert rep.totals["demand"] == pytest.approx(sum(sol.route_demands))


def load_environment_dict(d):
    from areacov.formats import parse_environment

    return parse_environment(json.dumps(d))


def test_geojson_round_trip(tmp_path):
    q = single_track_capacity(square_with_hole(), 0.5)
    res = run(PlanConfig(fov=0.5, depot=(0, 0), capacity=q), env=square_with_hole())
    assert len(res.solution.routes) >= 2
    p = tmp_path / "r.geojson"
    emit_geojson(res.solution, p, res.graph.points)
    data = json.loads(p.read_text())
    ids = {f["properties"]["route_id"] for f in data["features"]}
    assert ids == set(range(len(res.solution.routes)))
    # length model: cost equals traversed length
    for k, r in enumerate(res.solution.routes):
        feats = [f for f in data["features"] if f["properties"]["route_id"] == k]
        length = sum(float(np.sum(np.hypot(*np.diff(np.array(f["geometry"]["coordinates"]), axis=0).T))) for f in feats)
        assert length == pytest.approx(r.total_cost, abs=1e-6)
        assert sum(f["properties"]["cost"] for f in feats) == pytest.approx(r.total_cost, abs=1e-6)
    assert {f["properties"]["mode"] for f in data["features"]} == {"service", "deadhead"}
    total = sum(r["length"] for r in res.report.routes)
    assert total == pytest.approx(res.report.totals["length"])


def test_empty_geojson(tmp_path):
    from areacov.mem import Solution

    p = tmp_path / "e.geojson"
    emit_geojson(Solution([], 0.0, 0.0), p)
    assert json.loads(p.read_text()) == {"type": "FeatureCollection", "features": []}
    with pytest.raises(IoError):
        emit_geojson(Solution([], 0.0, 0.0), tmp_path / "no" / "dir" / "x.geojson")


def test_svg_outputs():
    import xml.etree.ElementTree as ET

    res = run(PlanConfig(fov=0.5, depot=(0, 0)), env=square())
    svg = render_svg(res.env, res.stages.cells, res.tracks)
    root = ET.fromstring(svg)
    paths = root.iter("{http://www.w3.org/2000/svg}path")
    assert sum(p.get("class") == "track" for p in paths) == len(res.tracks)
    res = run(PlanConfig(fov=0.5, depot=(0, 0), capacity=single_track_capacity(square(), 0.5)), env=square())
    assert len(res.solution.routes) == 2
    root = ET.fromstring(render_svg(res.env, res.stages.cells, res.tracks, res.solution, res.graph.points))
    colors = {p.get("stroke") for p in root.iter("{http://www.w3.org/2000/svg}path") if p.get("data-route")}
    assert len(colors) == 2
    preview = ET.fromstring(render_svg(square_with_hole(), run(PlanConfig(), env=square_with_hole()).stages.cells))
    classes = [p.get("class") for p in preview.iter("{http://www.w3.org/2000/svg}path")]
    assert "cell" in classes and "direction" in classes and "hole" in classes


def test_convert_dataset(tmp_path):
    with pytest.raises(FormatError):
        convert_dataset(tmp_path / "nope", "indoor25")
    src = tmp_path / "indoor"
    src.mkdir()
    save_environment(square_with_hole(), src / "a.json")
    (src / "b.txt").write_text("0 0\n4 0\n4 2\n0 2\n")
    (src / "c.yaml").write_text("outer: [[0, 0], [3, 0], [3, 3], [0, 3]]\nholes: []\n")
    out = convert_dataset(src, "indoor25", tmp_path / "out")
    assert len(out) == 3
    for env_path, cfg in out:
        assert load_environment(env_path).area > 0
        assert cfg["fov"] == 0.1 and cfg["include_boundary"] is True and cfg["cost"] == "length"
        PlanConfig.from_dict(json.loads(Path(str(env_path).replace(".json", ".config.json")).read_text()))
    bad = tmp_path / "bad"
    bad.mkdir()
    (bad / "x.txt").write_text("0 0\n1 0\n1 1 banana\n")
    with pytest.raises(FormatError) as exc:
        convert_dataset(bad, "outdoor300", tmp_path / "o2")
    assert "line 3" in str(exc.value)


def test_exit_codes(tmp_path, unit_env, capsys):
    assert main(["plan", "--env", str(unit_env), "--fov", "0.5", "--no-timings"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["totals"]["routes"] == 1 and "timings" not in rep
    assert main(["plan", "--env", str(unit_env), "--fov", "-1"]) == 2
    assert main(["plan", "--env", str(unit_env), "--depot", "5,5"]) == 3
    assert main(["plan", "--env", str(unit_env), "--fov", "0.5", "--capacity", "1"]) == 4
    assert main(["plan", "--env", str(tmp_path / "missing.json")]) == 5
    bow = write(tmp_path, "bow.json", {"outer": [[0, 0], [1, 1], [1, 0], [0, 1]]})
    assert main(["plan", "--env", str(bow)]) == 3
    err = capsys.readouterr().err
    assert "[load] GeometryError" in err
    assert exit_code(InvalidParameter("x")) == 2 and exit_code(RuntimeError()) == 1


def test_plan_outputs_and_determinism(tmp_path, unit_env):
    args = ["plan", "--env", str(unit_env), "--fov", "0.25", "--include-boundary", "--no-timings",
            "--out", str(tmp_path / "r.geojson"), "--svg", str(tmp_path / "r.svg")]
    assert main(args + ["--report", str(tmp_path / "a.json")]) == 0
    assert main(args + ["--report", str(tmp_path / "b.json")]) == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert (tmp_path / "r.svg").read_text().startswith("<svg")
    rep = json.loads((tmp_path / "a.json").read_text())
    assert rep["totals"]["cost"] == pytest.approx(sum(r["cost"] for r in rep["routes"]))
    assert rep["totals"]["turns"] == sum(r["turns"] for r in rep["routes"])


def test_report_timings(tmp_path, unit_env):
    res = run(PlanConfig(env=str(unit_env), fov=0.5))
    t = res.report.timings
    assert {"decomposition", "tracks", "graph", "routing", "total"} <= set(t)
    assert sum(v for k, v in t.items() if k != "total") <= t["total"] + 1e-6


def test_config_file_and_route_subcommand(tmp_path, unit_env, capsys):
    cfg = write(tmp_path, "c.json", {"env": str(unit_env), "fov": 0.5, "capacity": "inf", "capacities": ["inf"]})
    assert main(["plan", "--config", str(cfg), "--no-timings"]) == 0
    capsys.readouterr()
    assert main(["plan", "--config", str(write(tmp_path, "u.json", {"env": str(unit_env), "zoom": 2}))]) == 2
    res = run(PlanConfig(env=str(unit_env), fov=0.5))
    inst = tmp_path / "inst.json"
    res.graph.save(inst)
    assert main(["route", str(inst), "--solution", str(tmp_path / "s.json")]) == 0
    sol = json.loads((tmp_path / "s.json").read_text())
    assert sol["total_cost"] == pytest.approx(res.solution.total_cost)
    assert main(["decompose", "--env", str(unit_env)]) == 0
    assert len(json.loads(capsys.readouterr().out)["cells"]) == 1
    assert main(["batch", str(cfg), "--workers", "1"]) == 0
