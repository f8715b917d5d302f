"""Benchmark generation, scenario files and solution files."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .geometry import Cuboid
from .scenario import AXES, Scenario, ScenarioError, Service, pair_clearance
from .solution import Solution

SCHEMA_VERSION = 1


class SchemaError(ScenarioError):
    """A scenario or solution file does not follow the schema."""


@dataclass(frozen=True)
class RandomInstanceSpec:
    d: int = 17
    s: int = 5
    o: int = 5
    g: int = 1
    seed: int = 0
    epsilon: float = 12.0
    obstacle_edge: float = 10.0
    region_edge: float = 128.0
    radius: float = 4.0
    safety: float = 1.0
    elbow_min: float = 8.0
    # terminals are drawn from this lattice (capped by d)
    terminal_density: int = 17
    max_retries: int = 1000

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("density must be at least 2")
        if self.s < 0 or self.o < 0:
            raise ValueError("service and obstacle counts must be non-negative")
        steps = self.region_edge / (self.d - 1)
        if abs(steps - round(steps)) > 1e-9:
            raise ValueError("region edge must be divisible by d - 1")
        lo = self.epsilon + self.obstacle_edge / 2
        if lo > self.region_edge - lo:
            raise ValueError("obstacle-free layer leaves no room for obstacles")

    @property
    def spacing(self) -> float:
        return self.region_edge / (self.d - 1)

    @property
    def name(self) -> str:
        return f"rand-d{self.d}-s{self.s}-o{self.o}-g{self.g}"

    def rng(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence([self.seed, self.d, self.s, self.o, self.g])))


def generate_random(spec: RandomInstanceSpec) -> Scenario:
    """Random cube instance with cubic obstacles and terminals on two opposite faces."""
    rng = spec.rng()
    L = spec.region_edge
    region = Cuboid((0.0, 0.0, 0.0), (L, L, L))
    half = spec.obstacle_edge / 2
    lo_c, hi_c = spec.epsilon + half, L - spec.epsilon - half
    obstacles = []
    for _ in range(spec.o):
        c = rng.uniform(lo_c, hi_c, size=3)
        obstacles.append(Cuboid.from_center(tuple(c), (spec.obstacle_edge,) * 3))

    td = min(spec.d, spec.terminal_density)
    ticks = np.linspace(0.0, L, td)
    services = []
    used: list = []
    probe = Service(0, (0, 0, 0), (1, 0, 0), spec.radius, spec.safety)
    min_gap = pair_clearance(probe, probe)
    for k in range(spec.s):
        alpha1 = int(rng.integers(1, 10))
        for _ in range(spec.max_retries):
            sx, sz, tx, tz = (float(ticks[i]) for i in rng.integers(0, td, size=4))
            src, dst = (sx, 0.0, sz), (tx, L, tz)
            ok = all(np.linalg.norm(np.subtract(p, q)) >= min_gap for p in (src, dst) for q in used)
            ok = ok and not any(_inside(ob, p) for ob in obstacles for p in (src, dst))
            if ok:
                break
        else:
            raise ScenarioError(f"could not place terminals for service {k} in {spec.max_retries} tries")
        used += [src, dst]
        services.append(
            Service(
                k, src, dst, spec.radius, spec.safety, spec.elbow_min,
                alpha=(alpha1, 0, 0, 0, 0, 0, 0), source_axis="Y", destination_axis="Y",
            )
        )
    sc = Scenario(region, services, spec.spacing, obstacles=obstacles, cost_model="random", name=spec.name)
    sc.validate()
    return sc


def _inside(box: Cuboid, p) -> bool:
    return all(box.lo[i] < p[i] < box.hi[i] for i in range(3))


# ---------------------------------------------------------------------------
# built-in scenarios


def example1_scenario() -> Scenario:
    """A 6x6x4 room with a central 2x2x4 pillar and three services."""
    region = Cuboid((0, 0, 0), (6, 6, 4))
    pillar = Cuboid((2, 2, 0), (4, 4, 4))
    common = dict(radius=0.35, safety=0.1, elbow_min=1.0, alpha=(1, 0, 0, 0, 0, 0, 0))
    services = [
        Service(0, (0, 1, 2), (6, 5, 2), source_axis="X", destination_axis="X", **common),
        Service(1, (0, 5, 2), (6, 1, 2), source_axis="X", destination_axis="X", **common),
        Service(2, (1, 0, 2), (5, 6, 2), source_axis="Y", destination_axis="Y", **common),
    ]
    return Scenario(region, services, 1.0, obstacles=[pillar], cost_model="random", name="example1")


CASE_STUDY_ALPHA = (1.0, 2800.0, 700.0, 200.0, -0.7, 4000.0, 3000.0)


def case_study_scenario() -> Scenario:
    """A cabin shaped like the published case study (the real layout is not public).

    Five partial bulkheads cross the cabin along X; each has one or two
    holes that extend 200 units past the bulkhead on both sides so that
    pipes can approach them.
    """
    W, D, H = 5732.0, 2836.0, 2013.0
    region = Cuboid((0, 0, 0), (W, D, H))
    walls, holes = [], []
    # (x, y range, z range, hole centres (y, z))
    layout = [
        (1050, (0, D), (0, 1300), [(700, 700), (2100, 700)]),
        (2050, (0, 2100), (0, H), [(600, 1300), (1500, 600)]),
        (3050, (700, D), (0, H), [(1300, 1400), (2200, 600)]),
        (4050, (0, D), (0, 1200), [(1400, 700)]),
        (5050, (0, 2200), (500, H), [(1000, 1300)]),
    ]
    for x, (y0, y1), (z0, z1), hs in layout:
        walls.append(Cuboid((x - 5, y0, z0), (x + 5, y1, z1)))
        for yc, zc in hs:
            holes.append(Cuboid((x - 205, yc - 400, zc - 400), (x + 205, yc + 400, zc + 400)))
    prefs = [
        Cuboid((300, 200, 1700), (2900, 1100, 2013)),
        Cuboid((3100, 1600, 1700), (5600, 2700, 2013)),
    ]
    radii = [50, 75, 100, 50, 75, 100, 50, 75, 100, 75]
    src_yz = [(300, 300), (700, 1000), (1200, 1700), (1700, 400), (2300, 1100),
              (300, 1500), (1000, 300), (1500, 1100), (2000, 1800), (2600, 600)]
    dst_yz = [(400, 1800), (900, 600), (1300, 1300), (1900, 1700), (2500, 400),
              (600, 1000), (1100, 1800), (1700, 200), (2200, 1200), (2700, 1700)]
    services = []
    for k, (r, (ys, zs), (yd, zd)) in enumerate(zip(radii, src_yz, dst_yz)):
        services.append(
            Service(
                k, (0, ys, zs), (5700, yd, zd), radius=r, safety=50, elbow_min=50,
                alpha=CASE_STUDY_ALPHA, source_axis="X", destination_axis="X",
            )
        )
    return Scenario(
        region, services, 100.0, obstacles=walls, penetrable_zones=holes, preference_zones=prefs,
        cost_model="case_study", name="case-study-cabin",
    )


def data_path(name: str) -> Path:
    return Path(__file__).with_name("data") / name


# ---------------------------------------------------------------------------
# scenario files


def _at(path: str, msg: str) -> SchemaError:
    return SchemaError(f"{path}: {msg}")


def _number(obj, key, path, default=None, required=True) -> float:
    if key not in obj:
        if required and default is None:
            raise _at(f"{path}.{key}", "missing")
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise _at(f"{path}.{key}", f"expected a finite number, got {v!r}")
    return float(v)


def _vec3(v, path) -> tuple:
    if not isinstance(v, (list, tuple)) or len(v) != 3:
        raise _at(path, f"expected [x, y, z], got {v!r}")
    out = []
    for i, x in enumerate(v):
        if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
            raise _at(f"{path}[{i}]", f"expected a finite number, got {x!r}")
        out.append(float(x))
    return tuple(out)


def _cuboid(obj, path) -> Cuboid:
    if not isinstance(obj, dict) or "lo" not in obj or "hi" not in obj:
        raise _at(path, "expected an object with lo and hi")
    try:
        return Cuboid(_vec3(obj["lo"], f"{path}.lo"), _vec3(obj["hi"], f"{path}.hi"))
    except SchemaError:
        raise
    except ValueError as exc:
        raise _at(path, str(exc)) from None


def _cuboids(doc, key) -> list:
    items = doc.get(key, [])
    if not isinstance(items, list):
        raise _at(key, "expected a list")
    return [_cuboid(c, f"{key}[{i}]") for i, c in enumerate(items)]


def scenario_from_dict(doc: dict) -> Scenario:
    if not isinstance(doc, dict):
        raise _at("$", "expected an object")
    ver = doc.get("schema_version")
    if ver != SCHEMA_VERSION:
        raise _at("schema_version", f"unsupported version {ver!r}")
    region = _cuboid(doc.get("region"), "region")
    grid = doc.get("grid")
    if not isinstance(grid, dict):
        raise _at("grid", "expected an object with spacing")
    spacing = _number(grid, "spacing", "grid")
    cost_model = doc.get("cost_model", "case_study")
    if cost_model not in ("case_study", "random"):
        raise _at("cost_model", f"expected case_study or random, got {cost_model!r}")
    raw = doc.get("services")
    if not isinstance(raw, list):
        raise _at("services", "expected a list")
    services = []
    for i, s in enumerate(raw):
        p = f"services[{i}]"
        if not isinstance(s, dict):
            raise _at(p, "expected an object")
        if "id" not in s or isinstance(s["id"], bool) or not isinstance(s["id"], int):
            raise _at(f"{p}.id", "expected an integer")
        alpha = s.get("alpha", [1, 0, 0, 0, 0, 0, 0])
        if not isinstance(alpha, list) or len(alpha) != 7:
            raise _at(f"{p}.alpha", "expected 7 numbers")
        for j, a in enumerate(alpha):
            if isinstance(a, bool) or not isinstance(a, (int, float)):
                raise _at(f"{p}.alpha[{j}]", f"expected a number, got {a!r}")
        axes = {}
        for key in ("source_axis", "destination_axis"):
            ax = s.get(key)
            if ax is not None and ax not in AXES:
                raise _at(f"{p}.{key}", f"expected one of X, Y, Z, got {ax!r}")
            axes[key] = ax
        try:
            services.append(
                Service(
                    s["id"], _vec3(s.get("source"), f"{p}.source"), _vec3(s.get("destination"), f"{p}.destination"),
                    radius=_number(s, "radius", p),
                    safety=_number(s, "safety", p, default=0.0, required=False),
                    elbow_min=_number(s, "elbow_min", p, default=0.0, required=False),
                    alpha=tuple(alpha), **axes,
                )
            )
        except SchemaError:
            raise
        except ScenarioError as exc:
            raise ScenarioError(f"{p}: {exc}") from None
    prox = doc.get("proximity_radius")
    if prox is not None:
        prox = _number(doc, "proximity_radius", "$")
    sc = Scenario(
        region, services, spacing,
        obstacles=_cuboids(doc, "obstacles"),
        penetrable_zones=_cuboids(doc, "penetrable_zones"),
        preference_zones=_cuboids(doc, "preference_zones"),
        cost_model=cost_model, proximity_radius=prox, name=str(doc.get("name", "")),
    )
    sc.validate()
    return sc


def _box(c: Cuboid) -> dict:
    return {"lo": [float(v) for v in c.lo], "hi": [float(v) for v in c.hi]}


def scenario_to_dict(sc: Scenario, config: Optional[dict] = None) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "name": sc.name,
        "region": _box(sc.region),
        "grid": {"spacing": float(sc.spacing)},
        "cost_model": sc.cost_model,
        "obstacles": [_box(c) for c in sc.obstacles],
        "penetrable_zones": [_box(c) for c in sc.penetrable_zones],
        "preference_zones": [_box(c) for c in sc.preference_zones],
        "services": [],
    }
    if sc.proximity_radius is not None:
        doc["proximity_radius"] = float(sc.proximity_radius)
    for s in sc.services:
        item = {
            "id": s.id,
            "source": list(s.source),
            "destination": list(s.destination),
            "radius": s.radius,
            "safety": s.safety,
            "elbow_min": s.elbow_min,
            "alpha": list(s.alpha),
        }
        if s.source_axis is not None:
            item["source_axis"] = s.source_axis
        if s.destination_axis is not None:
            item["destination_axis"] = s.destination_axis
        doc["services"].append(item)
    if config:
        doc["config"] = config
    return doc


def load_scenario(path) -> Scenario:
    doc = _read_json(path)
    return scenario_from_dict(doc)


def load_run_config(path) -> dict:
    """The optional ``config`` block of a scenario file (empty if absent)."""
    cfg = _read_json(path).get("config", {})
    if not isinstance(cfg, dict):
        raise _at("config", "expected an object")
    return cfg


def save_scenario(sc: Scenario, path, config: Optional[dict] = None) -> None:
    _write_json(scenario_to_dict(sc, config), path)


def _read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"$: invalid JSON ({exc})") from None


def _write_json(doc, path) -> None:
    text = json.dumps(doc, indent=2, sort_keys=False, allow_nan=False, default=_jsonable)
    Path(path).write_text(text + "\n", encoding="utf-8")


def _jsonable(x):
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (set, frozenset)):
        return sorted(x)
    raise TypeError(f"cannot serialise {type(x).__name__}")


def _plain(x):
    """Meta values as JSON sees them: string keys, lists, non-finite floats as null."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, set, frozenset, np.ndarray)):
        items = sorted(x) if isinstance(x, (set, frozenset)) else list(x)
        return [_plain(v) for v in items]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x) if math.isfinite(x) else None
    return x


# ---------------------------------------------------------------------------
# solution files


def solution_to_dict(sol: Solution, g=None, costs=None) -> dict:
    polys = sol.meta.get("polylines", {})
    per = sol.meta.get("service_breakdown", {})
    items = []
    for k in sorted(sol.arcs):
        item = {"id": int(k), "arc_ids": [int(a) for a in sol.arcs[k]]}
        if g is not None:
            item["polyline"] = [list(p) for p in sol.polyline(g, k)]
        elif str(k) in polys or k in polys:
            item["polyline"] = polys.get(str(k), polys.get(k))
        if costs is not None:
            item["cost_breakdown"] = costs.breakdown(k, sol.arcs[k])
        elif str(k) in per or k in per:
            item["cost_breakdown"] = per.get(str(k), per.get(k))
        items.append(item)
    meta = {k: v for k, v in sol.meta.items() if k not in ("polylines", "service_breakdown")}
    return {
        "schema_version": SCHEMA_VERSION,
        "objective": float(sol.objective),
        "status": sol.status,
        "breakdown": {k: float(v) for k, v in sol.breakdown.items()},
        "meta": _plain(meta),
        "services": items,
    }


def solution_from_dict(doc: dict) -> Solution:
    if not isinstance(doc, dict):
        raise _at("$", "expected an object")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise _at("schema_version", f"unsupported version {doc.get('schema_version')!r}")
    arcs, polys, per = {}, {}, {}
    items = doc.get("services", [])
    if not isinstance(items, list):
        raise _at("services", "expected a list")
    for i, item in enumerate(items):
        p = f"services[{i}]"
        if not isinstance(item, dict) or not isinstance(item.get("id"), int):
            raise _at(f"{p}.id", "expected an integer")
        ids = item.get("arc_ids")
        if not isinstance(ids, list) or not all(isinstance(a, int) and not isinstance(a, bool) for a in ids):
            raise _at(f"{p}.arc_ids", "expected a list of integers")
        k = item["id"]
        arcs[k] = list(ids)
        if "polyline" in item:
            polys[str(k)] = item["polyline"]
        if "cost_breakdown" in item:
            per[str(k)] = item["cost_breakdown"]
    meta = dict(doc.get("meta", {}))
    if polys:
        meta["polylines"] = polys
    if per:
        meta["service_breakdown"] = per
    return Solution(
        arcs=arcs,
        objective=_number(doc, "objective", "$"),
        status=str(doc.get("status", "Feasible")),
        breakdown={k: float(v) for k, v in doc.get("breakdown", {}).items()},
        meta=meta,
    )


def save_solution(sol: Solution, path, g=None, costs=None) -> None:
    _write_json(solution_to_dict(sol, g, costs), path)


def load_solution(path) -> Solution:
    return solution_from_dict(_read_json(path))
