"""Per-service edge costs for the case-study and random cost systems."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import RoutingGraph
from .scenario import Scenario

COMPONENTS = {
    "case_study": ("length", "preference", "elbow", "height", "vertical", "penetrable", "near_terminal"),
    "random": ("length", "elbow", "vertical"),
}


class CostParameterError(ValueError):
    pass


@dataclass(frozen=True)
class EdgeCriteria:
    d: float
    El: int
    H: float
    Ch: int
    Pr: int
    Pc: int
    Cl: int


@dataclass
class CriteriaArrays:
    """Criteria for every edge; ``cl`` is the only service-dependent row."""

    d: np.ndarray
    el: np.ndarray
    h: np.ndarray
    ch: np.ndarray
    pr: np.ndarray
    pc: np.ndarray
    cl: dict  # service id -> bool array

    def row(self, e: int, k: int) -> EdgeCriteria:
        return EdgeCriteria(
            float(self.d[e]), int(self.el[e]), float(self.h[e]), int(self.ch[e]),
            int(self.pr[e]), int(self.pc[e]), int(self.cl[k][e]),
        )


def _in_zone(points, zone) -> np.ndarray:
    return np.all((points >= np.asarray(zone.lo)) & (points <= np.asarray(zone.hi)), axis=1)


def criteria_arrays(g: RoutingGraph, scenario: Scenario) -> CriteriaArrays:
    d = g.edge_length.copy()
    virt = g.is_virtual
    el = virt.astype(np.int8)
    ch = (g.edge_axis == 2).astype(np.int8)
    # height term only for edges lying in a plane parallel to XY
    flat = (~virt) & (g.edge_axis != 2)
    h = np.where(flat, scenario.ceiling - g.edge_mid[:, 2], 0.0)
    pr = np.zeros(g.n_edges, np.int8)
    for z in scenario.preference_zones:
        pr |= (_in_zone(g.seg_a, z) & _in_zone(g.seg_b, z)).astype(np.int8)
    pc = np.zeros(g.n_edges, np.int8)
    pc[: g.n_physical_edges] = g.physical.crosses_zone
    cl = {}
    for s in scenario.services:
        near = np.zeros(g.n_edges, bool)
        for p in (s.source, s.destination):
            near |= np.linalg.norm(g.seg_a - np.asarray(p), axis=1) <= scenario.rho
        cl[s.id] = near & virt
    return CriteriaArrays(d, el, h, ch, pr, pc, cl)


def criteria(g: RoutingGraph, scenario: Scenario, e: int, k: int) -> EdgeCriteria:
    return criteria_arrays(g, scenario).row(e, k)


def case_study_cost(c: EdgeCriteria, alpha) -> float:
    a1, a2, a3, a4, a5, a6, a7 = alpha
    if not a1 + a5 > 0:
        raise CostParameterError("alpha1 + alpha5 must be positive")
    value = (a1 + a5 * c.Pr) * c.d + a2 * c.El + a3 * c.H + a4 * c.Ch + a6 * c.Pc + a7 * c.Cl
    if value < 0:
        raise CostParameterError(f"negative edge cost {value}")
    return value


def random_cost(c: EdgeCriteria, alpha1) -> float:
    return float(alpha1 * (c.d + 10 * c.El + 2 * c.Ch))


def _components(model: str, crit: CriteriaArrays, alpha, cl) -> dict:
    if model == "random":
        a1 = alpha[0]
        return {"length": a1 * crit.d, "elbow": a1 * 10.0 * crit.el, "vertical": a1 * 2.0 * crit.ch}
    a1, a2, a3, a4, a5, a6, a7 = alpha
    return {
        "length": a1 * crit.d,
        "preference": a5 * crit.pr * crit.d,
        "elbow": a2 * crit.el.astype(float),
        "height": a3 * crit.h,
        "vertical": a4 * crit.ch.astype(float),
        "penetrable": a6 * crit.pc.astype(float),
        "near_terminal": a7 * cl.astype(float),
    }


class EdgeCostTable:
    """Dense ``(service, edge)`` costs, symmetric over arc orientation."""

    def __init__(self, g: RoutingGraph, scenario: Scenario):
        self.model = scenario.cost_model
        self.scenario = scenario
        self.service_ids = [s.id for s in scenario.services]
        self.row_of = {k: i for i, k in enumerate(self.service_ids)}
        self.criteria = criteria_arrays(g, scenario)
        self._parts = {}
        table = np.zeros((len(self.service_ids), g.n_edges))
        for s in scenario.services:
            parts = _components(self.model, self.criteria, s.alpha, self.criteria.cl[s.id])
            self._parts[s.id] = parts
            table[self.row_of[s.id]] = sum(parts.values())
        if (table < -1e-9).any():
            k, e = np.argwhere(table < -1e-9)[0]
            raise CostParameterError(f"negative cost {table[k, e]} on edge {e} for service {self.service_ids[k]}")
        self.table = np.maximum(table, 0.0)
        self.table.setflags(write=False)

    def edge_costs(self, k: int) -> np.ndarray:
        return self.table[self.row_of[k]]

    def arc_costs(self, k: int) -> np.ndarray:
        return np.repeat(self.edge_costs(k), 2)

    def arc_cost(self, k: int, a: int) -> float:
        return float(self.table[self.row_of[k], a // 2])

    def overlay(self) -> np.ndarray:
        """A private writable copy for heuristics to inflate."""
        return self.table.copy()

    @property
    def max_cost(self) -> float:
        return float(self.table.max()) if self.table.size else 0.0

    def breakdown(self, k: int, arcs) -> dict:
        e = np.asarray(arcs, dtype=int) // 2
        return {name: float(v[e].sum()) for name, v in self._parts[k].items()}


def objective(solution, costs: EdgeCostTable) -> tuple:
    """Total cost and per-component breakdown of a solution."""
    total = 0.0
    parts: dict = {}
    for k, arcs in solution.arcs.items():
        e = np.asarray(arcs, dtype=int) // 2
        total += float(costs.edge_costs(k)[e].sum())
        for name, v in costs.breakdown(k, arcs).items():
            parts[name] = parts.get(name, 0.0) + v
    return total, parts
