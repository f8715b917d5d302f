import csv
import dataclasses
import io

import numpy as np
import pytest

from conftest import build, open_box, svc
from mutations import mutate
from piperoute.exact import ExactConfig, solve_exact
from piperoute.geometry import Cuboid
from piperoute.instances import RandomInstanceSpec
from piperoute.validation import (
    CSV_COLUMNS,
    BenchmarkLimits,
    benchmark,
    export_geometry,
    tube_mesh,
    validate,
)


@pytest.fixture(scope="module")
def ex1_solution(example1):
    sc, g, costs = example1
    return solve_exact(g, costs, sc.services).solution


def test_exact_solution_passes(example1, ex1_solution):
    sc, g, costs = example1
    rep = validate(g, sc, costs, ex1_solution)
    assert rep.passed, rep.summary()
    assert rep.objective == pytest.approx(ex1_solution.objective)
    assert "all checks passed" in rep.summary()


def test_mutations_are_flagged(example1, ex1_solution):
    sc, g, costs = example1
    cases = mutate(g, ex1_solution)
    kinds = {c for _, c, _ in cases}
    assert kinds == {"dist", "elbow", "path"}
    for label, check, sol in cases:
        rep = validate(g, sc, costs, sol)
        assert check in rep.failed_checks(), (label, rep.summary())


def test_tampered_objective(example1, ex1_solution):
    sc, g, costs = example1
    sol = dataclasses.replace(ex1_solution, objective=ex1_solution.objective + 1)
    assert validate(g, sc, costs, sol).failed_checks() == {"objective"}


def test_unconstrained_solution_fails_dist(example1):
    sc, g, costs = example1
    plain = solve_exact(g, costs, sc.services, ExactConfig(dist=False, elbow=False)).solution
    rep = validate(g, sc, costs, plain)
    assert "dist" in rep.failed_checks()
    w = rep.by_check()["dist"][0]
    assert len(w.services) == 2 and w.value < 0.8


def test_obstacle_violation():
    # the same lattice without the obstacle has edges through it
    path = [svc(0, (0, 1, 1), (4, 1, 1))]
    free = open_box((5, 3, 3), path)
    g, costs = build(free)
    sol = solve_exact(g, costs, free.services).solution
    blocked = dataclasses.replace(free, obstacles=[Cuboid((1.5, 0.5, 0.5), (2.5, 1.5, 1.5))])
    rep = validate(g, blocked, costs, sol)
    assert rep.failed_checks() == {"obstacle"}
    assert validate(g, free, costs, sol).passed
    # a penetrable zone around the crossing makes it legal again
    holed = dataclasses.replace(blocked, penetrable_zones=[Cuboid((1, 0.5, 0.5), (3, 1.5, 1.5))])
    assert validate(g, holed, costs, sol).passed


def test_clearance_sensitivity(example1, ex1_solution):
    sc, g, costs = example1
    rep = validate(g, sc, costs, ex1_solution)
    gap = min(rep.min_clearance.values())
    # widen every pipe until the closest pair is just too close
    r = sc.services[0].radius + (gap - 0.8) / 2 + 1e-3
    wide = dataclasses.replace(sc, services=[dataclasses.replace(s, radius=r) for s in sc.services])
    assert "dist" in validate(g, wide, costs, ex1_solution).failed_checks()


def test_obj_export(tmp_path, example1, ex1_solution):
    sc, g, costs = example1
    info = export_geometry(sc, ex1_solution, tmp_path / "r.obj", g=g)
    text = (tmp_path / "r.obj").read_text().splitlines()
    objects = [ln.split()[1] for ln in text if ln.startswith("o ")]
    assert objects == ["service_0", "service_1", "service_2", "obstacle_0"]
    assert len(info["objects"]) == 4
    assert sum(ln.startswith("l ") for ln in text) == 3


def test_tube_vertices_on_radius():
    from piperoute.geometry import segment_distance

    poly = [(0, 0, 0), (3, 0, 0), (3, 2, 0), (3, 2, 4)]
    verts, faces = tube_mesh(poly, 0.5, sides=12)
    assert len(verts) == 3 * 2 * 12
    # one open cylinder per straight run, two rings each
    for i, (a, b) in enumerate(zip(poly[:-1], poly[1:])):
        for p in verts[24 * i: 24 * (i + 1)]:
            assert abs(segment_distance((p, p), (a, b)) - 0.5) <= 1e-6
    assert min(min(f) for f in faces) >= 0 and max(max(f) for f in faces) < len(verts)


def test_benchmark_csv(tmp_path):
    specs = [RandomInstanceSpec(d=9, s=2, o=0, seed=i) for i in range(2)] + [RandomInstanceSpec(d=9, s=3, o=3, seed=0)]
    text = benchmark(specs, limits=BenchmarkLimits(time_limit=30, node_limit=5000), path=tmp_path / "b.csv")
    rows = list(csv.DictReader(io.StringIO(text)))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert [(r["d"], r["s"], r["o"]) for r in rows] == [("9", "2", "0"), ("9", "3", "3"), ("total", "", "")]
    assert (tmp_path / "b.csv").read_text() == text
    for r in rows:
        assert float(r["GAP_H2"]) >= 0 and float(r["Cons"]) > 0


def test_benchmark_empty(caplog):
    text = benchmark([], methods=("h2",))
    assert text.splitlines()[0] == ",".join(CSV_COLUMNS)
    assert "no instances" in caplog.text.lower()
