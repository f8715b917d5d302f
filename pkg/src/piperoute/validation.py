"""Independent feasibility checks, benchmark tables and OBJ export.

Nothing here reads solver state: every check is measured again from the
scenario geometry and the arc lists of the solution.
"""
from __future__ import annotations

import csv
import io
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geometry import Cuboid, clip_segment_to_box, cuboid_contains, cuboid_segment_distance, segment_distance_many
from .scenario import InfeasibleScenarioError, ScenarioError, pair_clearance
from .solution import Solution

log = logging.getLogger(__name__)

CHECKS = ("path", "node", "dist", "elbow", "obstacle", "objective")
CSV_COLUMNS = ("d", "s", "o", "Vars", "Cons", "Solved", "GAP_Ex", "GAP_H1", "GAP_H2", "Time_Ex", "Time_H1", "Time_H2")


@dataclass(frozen=True)
class Witness:
    """One violated requirement.

    ``check`` is one of ``CHECKS``; ``services`` and ``arcs`` name what is
    involved and ``value`` is the measured quantity (a distance for the
    geometric checks).
    """

    check: str
    services: tuple
    arcs: tuple = ()
    value: float = math.nan
    detail: str = ""


@dataclass
class ValidationReport:
    witnesses: list = field(default_factory=list)
    objective: float = 0.0
    stored_objective: float = 0.0
    min_clearance: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.witnesses

    def failed_checks(self) -> set:
        return {w.check for w in self.witnesses}

    def check_passed(self, name: str) -> bool:
        return name not in self.failed_checks()

    def by_check(self) -> dict:
        out = {c: [] for c in CHECKS}
        for w in self.witnesses:
            out[w.check].append(w)
        return out

    def summary(self) -> str:
        if self.passed:
            return f"all checks passed (objective {self.objective:.6g})"
        lines = []
        for c, ws in self.by_check().items():
            if ws:
                lines.append(f"{c}: {len(ws)} violation(s), e.g. {ws[0].detail}")
        return "\n".join(lines)


def _check_paths(g, solution, report):
    ok = {}
    for k, arcs in sorted(solution.arcs.items()):
        bad = None
        if k not in g.terminals:
            bad = "unknown service"
        elif not len(arcs):
            bad = "empty path"
        elif any(a < 0 or a >= g.n_arcs for a in arcs):
            bad = "arc id out of range"
        if bad is None:
            tails = [int(g.arc_tail(a)) for a in arcs]
            heads = [int(g.arc_head(a)) for a in arcs]
            s, t = g.terminals[k]
            if tails[0] != s:
                bad = f"starts at node {tails[0]}, source is {s}"
            elif heads[-1] != t:
                bad = f"ends at node {heads[-1]}, destination is {t}"
            else:
                for i in range(len(arcs) - 1):
                    if heads[i] != tails[i + 1]:
                        bad = f"arcs {arcs[i]} and {arcs[i + 1]} do not chain"
                        break
                else:
                    seen = [s] + heads
                    if len(set(seen)) != len(seen):
                        bad = "walk visits a node twice"
        if bad:
            report.witnesses.append(Witness("path", (k,), tuple(arcs[:2]), detail=f"service {k}: {bad}"))
        ok[k] = bad is None
    for k in g.terminals:
        if k not in solution.arcs:
            report.witnesses.append(Witness("path", (k,), detail=f"service {k}: no path"))
    return ok


def _check_nodes(g, solution, ok, report):
    owner = {}
    for k in sorted(solution.arcs):
        if not ok[k]:
            continue
        for v in g.arcs_to_nodes(solution.arcs[k]):
            if v in owner and owner[v] != k:
                report.witnesses.append(
                    Witness("node", (owner[v], k), value=0.0, detail=f"services {owner[v]} and {k} share node {v}")
                )
            owner.setdefault(v, k)


def _check_dist(g, svc, solution, ok, report):
    ids = [k for k in sorted(solution.arcs) if ok[k]]
    for i, k in enumerate(ids):
        a1 = np.asarray(solution.arcs[k], dtype=int)
        for k2 in ids[i + 1:]:
            a2 = np.asarray(solution.arcs[k2], dtype=int)
            r = pair_clearance(svc[k], svc[k2])
            e1, e2 = a1 // 2, a2 // 2
            d = segment_distance_many(g.seg_a[e1][:, None], g.seg_b[e1][:, None], g.seg_a[e2][None], g.seg_b[e2][None])
            report.min_clearance[(k, k2)] = float(d.min())
            # two elbows never carry a clearance row of their own
            both = g.is_virtual[e1][:, None] & g.is_virtual[e2][None]
            for x, y in zip(*np.nonzero((d < r) & ~both)):
                report.witnesses.append(Witness(
                    "dist", (k, k2), (int(a1[x]), int(a2[y])), float(d[x, y]),
                    f"services {k},{k2}: arcs {a1[x]},{a2[y]} are {d[x, y]:.6g} apart, need {r:.6g}",
                ))


def _elbow_points(g, arcs):
    arcs = np.asarray(arcs, dtype=int)
    virt = arcs[g.is_virtual[arcs // 2]]
    return [(int(a), g.seg_a[a // 2]) for a in virt]


def _check_elbows(g, svc, solution, ok, report):
    for k, arcs in sorted(solution.arcs.items()):
        if not ok[k]:
            continue
        lim = svc[k].elbow_min
        pts = _elbow_points(g, arcs)
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                d = float(np.linalg.norm(pts[i][1] - pts[j][1]))
                if d <= lim:
                    report.witnesses.append(Witness(
                        "elbow", (k,), (pts[i][0], pts[j][0]), d,
                        f"service {k}: elbows {d:.6g} apart, need more than {lim:.6g}",
                    ))


def _exempt(scenario, ob: Cuboid, a, b) -> bool:
    """The segment goes through ``ob`` only inside a penetrable zone."""
    iv = clip_segment_to_box(a, b, ob.lo, ob.hi)
    for z in scenario.penetrable_zones:
        if cuboid_segment_distance(z, (a, b)) > 0:
            continue
        if iv is None:
            return True
        d = np.asarray(b, float) - np.asarray(a, float)
        p0 = np.asarray(a, float) + iv[0] * d
        p1 = np.asarray(a, float) + iv[1] * d
        if cuboid_contains(z, p0) and cuboid_contains(z, p1):
            return True
    return False


def _check_obstacles(g, scenario, svc, solution, ok, report):
    for k, arcs in sorted(solution.arcs.items()):
        if not ok[k]:
            continue
        need = svc[k].clearance
        for a in arcs:
            e = a // 2
            if g.is_virtual[e]:
                continue
            sa, sb = g.seg_a[e], g.seg_b[e]
            if not (cuboid_contains(scenario.region, sa) and cuboid_contains(scenario.region, sb)):
                report.witnesses.append(Witness("obstacle", (k,), (int(a),), detail=f"service {k}: arc {a} leaves the region"))
                continue
            for i, ob in enumerate(scenario.obstacles):
                d = cuboid_segment_distance(ob, (sa, sb))
                if d < need and not _exempt(scenario, ob, sa, sb):
                    report.witnesses.append(Witness(
                        "obstacle", (k,), (int(a),), d,
                        f"service {k}: arc {a} is {d:.6g} from obstacle {i}, need {need:.6g}",
                    ))


def _recompute(costs, solution, ok) -> float:
    total = 0.0
    for k, arcs in solution.arcs.items():
        if ok.get(k):
            total += float(np.sum(costs.edge_costs(k)[np.asarray(arcs, dtype=int) // 2]))
    return total


def validate(g, scenario, costs, solution: Solution, rtol: float = 1e-6) -> ValidationReport:
    """Check every constraint family of ``solution`` from scratch."""
    svc = {s.id: s for s in scenario.services}
    report = ValidationReport(stored_objective=float(solution.objective))
    ok = _check_paths(g, solution, report)
    _check_nodes(g, solution, ok, report)
    _check_dist(g, svc, solution, ok, report)
    _check_elbows(g, svc, solution, ok, report)
    _check_obstacles(g, scenario, svc, solution, ok, report)
    report.objective = _recompute(costs, solution, ok)
    stored = report.stored_objective
    if abs(report.objective - stored) > rtol * max(1.0, abs(report.objective)):
        report.witnesses.append(Witness(
            "objective", tuple(sorted(solution.arcs)), value=report.objective,
            detail=f"stored objective {stored:.10g}, recomputed {report.objective:.10g}",
        ))
    return report


# ---------------------------------------------------------------------------
# benchmark


@dataclass
class BenchmarkLimits:
    time_limit: float = 60.0
    # a node budget makes exact runs reproducible regardless of machine speed
    node_limit: Optional[int] = None
    h2: object = None
    h1: object = None


def _run_method(method, g, costs, services, limits):
    from .exact import ExactConfig, solve_exact
    from .heuristics import H1Config, H2Config, HeuristicFailure, run_h1, run_h2

    t0 = time.perf_counter()
    try:
        if method == "exact":
            res = solve_exact(g, costs, services, ExactConfig(time_limit=limits.time_limit, node_limit=limits.node_limit))
            return res, time.perf_counter() - t0
        if method == "h2":
            cfg = limits.h2 or H2Config()
            return run_h2(g, costs, services, cfg), time.perf_counter() - t0
        cfg = limits.h1 or H1Config(time_limit=limits.time_limit, node_limit=limits.node_limit)
        return run_h1(g, costs, services, cfg), time.perf_counter() - t0
    except (HeuristicFailure, InfeasibleScenarioError) as exc:
        log.warning("%s failed: %s", method, exc)
        return None, time.perf_counter() - t0


def benchmark_instance(spec, methods, limits: BenchmarkLimits) -> dict:
    """Run the requested methods on one generated instance."""
    from .costs import EdgeCostTable
    from .exact import build_master
    from .graph import build_routing_graph
    from .instances import generate_random

    sc = generate_random(spec)
    g = build_routing_graph(sc)
    costs = EdgeCostTable(g, sc)
    model = build_master(g, costs, sc.services)
    row = {"d": spec.d, "s": spec.s, "o": spec.o, "g": spec.g, "Vars": model.n_active_vars, "Cons": model.n_constraints}
    best = None
    if "exact" in methods:
        res, t = _run_method("exact", g, costs, sc.services, limits)
        row["Time_Ex"] = t
        row["status_Ex"] = res.status
        row["Solved"] = int(res.status == "Optimal")
        row["GAP_Ex"] = None if res.gap is None else 100.0 * res.gap
        if res.solution is not None:
            best = res.objective
    for m, tag in (("h1", "H1"), ("h2", "H2")):
        if m not in methods:
            continue
        sol, t = _run_method(m, g, costs, sc.services, limits)
        row[f"Time_{tag}"] = t
        row[f"obj_{tag}"] = None if sol is None else sol.objective
        if sol is not None and best is not None and best > 0:
            row[f"GAP_{tag}"] = 100.0 * (sol.objective - best) / best
    return row


def _mean(vals):
    vals = [v for v in vals if v is not None]
    return sum(vals) / len(vals) if vals else None


def _fmt(v, digits=2):
    if v is None:
        return ""
    if isinstance(v, int):
        return str(v)
    return f"{v:.{digits}f}"


def _aggregate(label, rows):
    out = dict(label)
    out["Vars"] = _mean([r["Vars"] for r in rows])
    out["Cons"] = _mean([r["Cons"] for r in rows])
    solved = [r.get("Solved") for r in rows if "Solved" in r]
    out["Solved"] = sum(solved) if solved else None
    for c in CSV_COLUMNS[6:]:
        out[c] = _mean([r.get(c) for r in rows])
    return out


def benchmark(specs, methods=("exact", "h1", "h2"), limits: Optional[BenchmarkLimits] = None, path=None) -> str:
    """Run every spec, group by ``(d, s, o)`` and return the CSV text.

    One row per group (values averaged over its replicates, ``Solved`` is a
    count) and a final ``total`` row over all instances.  Failed heuristic
    runs leave their gap empty.
    """
    limits = limits or BenchmarkLimits()
    methods = tuple(methods)
    unknown = set(methods) - {"exact", "h1", "h2"}
    if unknown:
        raise ValueError(f"unknown methods {sorted(unknown)}")
    rows = []
    for spec in specs:
        try:
            rows.append(benchmark_instance(spec, methods, limits))
        except (ScenarioError, ValueError) as exc:
            log.warning("instance %s skipped: %s", spec.name, exc)
    if not specs:
        log.warning("benchmark called with no instances")
    groups: dict = {}
    for r in rows:
        groups.setdefault((r["d"], r["s"], r["o"]), []).append(r)
    table = [_aggregate({"d": d, "s": s, "o": o}, rs) for (d, s, o), rs in sorted(groups.items())]
    if rows:
        table.append(_aggregate({"d": "total", "s": "", "o": ""}, rows))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for t in table:
        w.writerow([
            t["d"], t["s"], t["o"], _fmt(t["Vars"], 1), _fmt(t["Cons"], 1), _fmt(t["Solved"]),
            *(_fmt(t[c]) for c in CSV_COLUMNS[6:9]), *(_fmt(t[c], 3) for c in CSV_COLUMNS[9:]),
        ])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


# ---------------------------------------------------------------------------
# OBJ export


def _box_faces(lo, hi):
    x0, y0, z0 = lo
    x1, y1, z1 = hi
    verts = [(x0, y0, z0), (x1, y0, z0), (x1, y1, z0), (x0, y1, z0),
             (x0, y0, z1), (x1, y0, z1), (x1, y1, z1), (x0, y1, z1)]
    quads = [(0, 3, 2, 1), (4, 5, 6, 7), (0, 1, 5, 4), (2, 3, 7, 6), (1, 2, 6, 5), (0, 4, 7, 3)]
    return verts, quads


def tube_mesh(polyline, radius: float, sides: int = 8):
    """Vertices and triangles of straight cylinders around each leg."""
    verts, tris = [], []
    pts = [np.asarray(p, float) for p in polyline]
    ang = np.linspace(0.0, 2 * np.pi, sides, endpoint=False)
    for a, b in zip(pts[:-1], pts[1:]):
        d = b - a
        n = np.linalg.norm(d)
        if n == 0:
            continue
        d /= n
        helper = np.eye(3)[int(np.argmin(np.abs(d)))]
        u = np.cross(d, helper)
        u /= np.linalg.norm(u)
        v = np.cross(d, u)
        ring = [radius * (np.cos(t) * u + np.sin(t) * v) for t in ang]
        base = len(verts)
        verts.extend(a + r for r in ring)
        verts.extend(b + r for r in ring)
        for i in range(sides):
            j = (i + 1) % sides
            tris.append((base + i, base + j, base + sides + j))
            tris.append((base + i, base + sides + j, base + sides + i))
    return verts, tris


def export_geometry(scenario, solution: Optional[Solution], path, g=None, tubes: bool = False, sides: int = 8) -> dict:
    """Write an ASCII Wavefront OBJ of the routes, obstacles and zones.

    Routes come from the solution's polylines (``meta["polylines"]``) when
    no graph is given.  Returns the object names in file order.
    """
    out = []
    names = []
    nv = 0

    def obj(name):
        names.append(name)
        out.append(f"o {name}")

    svc = {s.id: s for s in scenario.services}
    if solution is not None:
        for k in sorted(solution.arcs):
            if g is not None:
                poly = solution.polyline(g, k)
            else:
                polys = solution.meta.get("polylines", {})
                poly = [tuple(p) for p in polys.get(str(k), polys.get(k, []))]
            if not poly:
                continue
            obj(f"service_{k}")
            for p in poly:
                out.append("v {:.9g} {:.9g} {:.9g}".format(*p))
            out.append("l " + " ".join(str(nv + i + 1) for i in range(len(poly))))
            nv += len(poly)
            if tubes and k in svc:
                verts, tris = tube_mesh(poly, svc[k].radius, sides)
                obj(f"service_{k}_tube")
                for p in verts:
                    out.append("v {:.9g} {:.9g} {:.9g}".format(*p))
                for t in tris:
                    out.append("f " + " ".join(str(nv + i + 1) for i in t))
                nv += len(verts)
    for group in ("obstacles", "penetrable_zones", "preference_zones"):
        for i, c in enumerate(getattr(scenario, group)):
            obj(f"{group[:-1]}_{i}")
            verts, quads = _box_faces(c.lo, c.hi)
            for p in verts:
                out.append("v {:.9g} {:.9g} {:.9g}".format(*p))
            for q in quads:
                out.append("f " + " ".join(str(nv + i + 1) for i in q))
            nv += len(verts)
    with open(path, "w") as fh:
        fh.write("# pipe routing export\n")
        fh.write("\n".join(out) + "\n")
    return {"objects": names, "vertices": nv}
