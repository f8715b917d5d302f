"""Matheuristics: tube restriction (H1) and decomposition with cost inflation (H2)."""
from __future__ import annotations

import dataclasses
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .costs import EdgeCostTable, objective
from .exact import ExactConfig, dist_violations, service_weights, solve_exact
from .graph import RoutingGraph, build_routing_graph
from .paths import shortest_path
from .scenario import InfeasibleScenarioError, pair_clearance
from .solution import Solution

log = logging.getLogger(__name__)

ITERATION_TYPES = ("par", "cluster", "seq")


class HeuristicFailure(RuntimeError):
    """No conflict-free solution was found within the iteration budget."""


class ElbowTestFailed(RuntimeError):
    """The iterated shortest path could not satisfy the elbow spacing."""


@dataclass
class H2Config:
    maxit: int = 20
    # relative weights of parallel, cluster and sequential iterations, in that order
    schedule: tuple = (0.1, 0.8, 0.1)
    gamma: float = 10.0
    gamma_seq: float = 1.5
    priority: str = "length"
    elbow_maxit: int = 50
    fallback_density: Optional[int] = None
    threads: int = 1
    exact_fallback_time: float = 60.0
    # rip-up and re-route when the iterations end with conflicts
    repair: bool = True
    # re-route services one at a time around the others once conflict-free
    polish: bool = True

    def __post_init__(self):
        if self.maxit < 1:
            raise ValueError("maxit must be at least 1")
        if not self.gamma > 1 or not self.gamma_seq > 1:
            raise ValueError("inflation factors must exceed 1")
        if len(self.schedule) != 3 or min(self.schedule) < 0 or sum(self.schedule) <= 0:
            raise ValueError("schedule needs three non-negative weights")
        if self.priority not in ("length", "id"):
            raise ValueError(f"unknown cluster priority {self.priority!r}")

    @classmethod
    def case_study(cls, **kw) -> "H2Config":
        return cls(maxit=10, schedule=(0.1, 0.2, 0.7), **kw)

    def iteration_types(self) -> list:
        """Type of each iteration 1..maxit: parallel first, sequential last."""
        total = float(sum(self.schedule))
        n_par = int(round(self.schedule[0] / total * self.maxit))
        n_cl = int(round(self.schedule[1] / total * self.maxit))
        n_cl = min(n_cl, self.maxit - n_par)
        return ["par"] * n_par + ["cluster"] * n_cl + ["seq"] * (self.maxit - n_par - n_cl)


@dataclass
class H1Config:
    # tube half-width per service id (or one value for all); None means R + Delta
    delta: object = None
    # growth step; None means the grid spacing
    increment: Optional[float] = None
    time_limit: float = 60.0
    node_limit: Optional[int] = None
    init_sol: dict = field(default_factory=dict)  # service id -> list of Cuboid
    max_rounds: int = 10_000

    def __post_init__(self):
        if self.increment is not None and not self.increment > 0:
            raise ValueError("increment must be positive")
        vals = self.delta.values() if isinstance(self.delta, dict) else [self.delta]
        if any(v is not None and not v > 0 for v in vals):
            raise ValueError("delta must be positive")

    @classmethod
    def case_study(cls, services, **kw) -> "H1Config":
        return cls(delta=max(s.clearance for s in services), increment=0.1, **kw)

    def initial_delta(self, services) -> dict:
        if self.delta is None:
            return {s.id: s.clearance for s in services}
        if isinstance(self.delta, dict):
            return {s.id: float(self.delta.get(s.id, s.clearance)) for s in services}
        return {s.id: float(self.delta) for s in services}


# ---------------------------------------------------------------------------
# elbow-aware shortest path


def _elbows(g: RoutingGraph, nodes) -> list:
    """``(index, physical node)`` of every elbow; ``index`` is the arc position."""
    return [(i, u // 3) for i, (u, v) in enumerate(zip(nodes[:-1], nodes[1:])) if u // 3 == v // 3]


def first_elbow_failure(g: RoutingGraph, nodes, limit: float):
    """First elbow (in path order) within ``limit`` of an earlier one, or None.

    Returns ``(j, i)``: positions in the elbow list of the failing elbow and
    of the last elbow before it.
    """
    el = _elbows(g, nodes)
    xyz = g.physical.coords
    for j in range(1, len(el)):
        p = xyz[el[j][1]]
        for i in range(j):
            if np.linalg.norm(p - xyz[el[i][1]]) <= limit:
                return j, j - 1
    return None


def spp_elbow_test(g: RoutingGraph, weights: np.ndarray, service, config: Optional[H2Config] = None) -> list:
    """Iterated shortest paths until the elbow spacing holds.

    ``weights`` are the service's edge costs (``inf`` = unusable); they are
    copied, never modified.  Returns a node path from source to destination.
    """
    cfg = config or H2Config()
    w = np.array(weights, dtype=float)
    finite = w[np.isfinite(w)]
    bump = float(finite.max()) if finite.size else 1.0
    bump = bump if bump > 0 else 1.0
    s, t = g.terminals[service.id]
    src, dst = s, t
    prefix = [src]
    seen = set()
    swapped = False
    for _ in range(cfg.elbow_maxit):
        ww = w.copy()
        for v in prefix[:-1]:
            ww[g.incident_edges(v)] = np.inf
        _, tail = shortest_path(g, ww, prefix[-1], dst)
        if tail is None:
            if len(prefix) == 1:
                break
            # the kept prefix boxed the path in: start over from the source
            prefix = [src]
            continue
        path = prefix[:-1] + tail
        fail = first_elbow_failure(g, path, service.elbow_min)
        if fail is None:
            return path[::-1] if swapped else path
        j, i = fail
        el = _elbows(g, path)
        bad_node = el[j][1]
        w[g.virtual_edges_at(bad_node)] += bump
        # keep the path through the last elbow that passed and re-route from there
        cut = el[i][0] + 1
        key = (path[cut], bad_node)
        if key in seen:
            swapped = not swapped
            src, dst = dst, src
            prefix = [src]
            seen.clear()
            continue
        seen.add(key)
        prefix = path[: cut + 1]
    raise ElbowTestFailed(f"service {service.id}: elbow test not passed in {cfg.elbow_maxit} iterations")


# ---------------------------------------------------------------------------
# covering lists and conflicts


def _phys_tree(g: RoutingGraph) -> cKDTree:
    tree = g.__dict__.get("_phys_tree")
    if tree is None:
        tree = g.__dict__["_phys_tree"] = cKDTree(g.physical.coords)
    return tree


def covering_list(g: RoutingGraph, path, delta: float) -> set:
    """Path vertices closed under adjacency within ``delta`` of some path vertex."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    cover = set(int(v) for v in path)
    xyz = g.physical.coords
    tree = _phys_tree(g)
    anchors = sorted({int(v) // 3 for v in path})
    balls = []
    for p0 in anchors:
        near = [q for q in tree.query_ball_point(xyz[p0], delta) if np.linalg.norm(xyz[q] - xyz[p0]) < delta]
        balls.append({3 * q + a for q in near for a in range(3)})
    # repeat until no anchor can grow the list any further
    changed = True
    while changed:
        changed = False
        for ball in balls:
            stack = [v for v in ball - cover if any(int(u) in cover for u in g.neighbors(v))]
            while stack:
                v = stack.pop()
                if v in cover:
                    continue
                cover.add(v)
                changed = True
                for u in g.neighbors(v):
                    u = int(u)
                    if u in ball and u not in cover:
                        stack.append(u)
    return cover


def conflict_pairs(coverings: dict) -> set:
    """Unordered service pairs whose covering lists intersect."""
    ids = sorted(coverings)
    out = set()
    for i, k in enumerate(ids):
        for k2 in ids[i + 1:]:
            if not coverings[k].isdisjoint(coverings[k2]):
                out.add((k, k2))
    return out


def _path_length(g: RoutingGraph, arcs) -> float:
    return float(g.edge_length[np.asarray(arcs, dtype=int) // 2].sum()) if len(arcs) else 0.0


class _H2State:
    def __init__(self, g, costs, services, cfg):
        self.g, self.cfg = g, cfg
        self.services = list(services)
        self.svc = {s.id: s for s in services}
        self.ids = [s.id for s in services]
        self.base = service_weights(g, costs, services)
        self.overlay = {k: w.copy() for k, w in self.base.items()}
        finite = np.concatenate([w[np.isfinite(w)] for w in self.base.values()]) if self.ids else np.zeros(0)
        self.ceiling = cfg.gamma * (float(finite.max()) if finite.size else 1.0)
        self.paths: dict = {}
        self.arcs: dict = {}
        self.cover: dict = {}
        self.exact_fallbacks = 0

    def route(self, k):
        s = self.svc[k]
        try:
            path = spp_elbow_test(self.g, self.overlay[k], s, self.cfg)
        except ElbowTestFailed:
            # exact single-service solve on the inflated costs
            res = solve_exact(
                self.g, None, [s], ExactConfig(time_limit=self.cfg.exact_fallback_time, dist=False),
                overrides={k: self.overlay[k]},
            )
            if res.solution is None:
                raise HeuristicFailure(f"service {k}: no elbow-feasible path") from None
            self.exact_fallbacks += 1
            path = self.g.arcs_to_nodes(res.solution.arcs[k])
        return path

    def route_many(self, ks):
        if self.cfg.threads > 1 and len(ks) > 1:
            with ThreadPoolExecutor(max_workers=self.cfg.threads) as ex:
                found = list(ex.map(self.route, ks))
        else:
            found = [self.route(k) for k in ks]
        for k, p in zip(ks, found):
            self.set_path(k, p)

    def set_path(self, k, path):
        self.paths[k] = path
        self.arcs[k] = self.g.nodes_to_arcs(path)
        self.cover[k] = covering_list(self.g, path, self.svc[k].clearance)

    def conflicts(self) -> set:
        """Service pairs whose covering lists meet or whose paths are too close."""
        pairs = conflict_pairs(self.cover)
        viol = dist_violations(self.g, self.arcs, self.svc)
        near_arcs: dict = {}
        for d, k, a, k2, a2 in viol:
            near_arcs.setdefault((k, k2), set()).add(a2)
            near_arcs.setdefault((k2, k), set()).add(a)
            pairs.add((min(k, k2), max(k, k2)))
        self._near = near_arcs
        return pairs

    def conflict_edges(self, k, k2) -> np.ndarray:
        """Edges that put ``k`` in conflict with ``k2``'s current path."""
        g = self.g
        cov = self.cover[k] & self.cover[k2]
        parts = []
        if cov:
            parts.append(np.concatenate([g.incident_edges(v) for v in sorted(cov)]))
        arcs = self._near.get((k, k2))
        if arcs:
            e = np.array(sorted(arcs)) // 2
            r = pair_clearance(self.svc[k], self.svc[k2])
            parts.append(g.edges_near_segments(g.seg_a[e], g.seg_b[e], r))
        if not parts:
            return np.zeros(0, dtype=int)
        return np.unique(np.concatenate(parts))

    def raise_cost(self, k, edges):
        if len(edges):
            w = self.overlay[k]
            w[edges] = np.maximum(w[edges], self.ceiling)

    def scale_cost(self, k, edges):
        if len(edges):
            self.overlay[k][edges] *= self.cfg.gamma_seq

    def seq_edges(self, k, k2) -> np.ndarray:
        g = self.g
        parts = [np.concatenate([g.incident_edges(v) for v in sorted(self.cover[k])])]
        e = np.asarray(self.arcs[k], dtype=int) // 2
        if len(e):
            parts.append(g.edges_near_segments(g.seg_a[e], g.seg_b[e], pair_clearance(self.svc[k], self.svc[k2])))
        return np.unique(np.concatenate(parts))

    def blocked_by_others(self, k) -> np.ndarray:
        """Edges ``k`` cannot use without conflicting with the other current paths.

        Blocks edges at vertices closer than ``k``'s covering radius to another
        covering list (so the lists stay disjoint) and edges within the pair
        clearance of another path.
        """
        g = self.g
        xyz = g.physical.coords
        tree = _phys_tree(g)
        delta = self.svc[k].clearance
        bad_phys = set()
        parts = [np.zeros(0, dtype=int)]
        for k2 in self.ids:
            if k2 == k or k2 not in self.arcs:
                continue
            pts = xyz[sorted({v // 3 for v in self.cover[k2]})]
            for p0, near in zip(pts, tree.query_ball_point(pts, delta)):
                bad_phys.update(q for q in near if np.linalg.norm(xyz[q] - p0) < delta)
            e = np.asarray(self.arcs[k2], dtype=int) // 2
            if len(e):
                r = pair_clearance(self.svc[k], self.svc[k2])
                parts.append(g.edges_near_segments(g.seg_a[e], g.seg_b[e], r))
        if bad_phys:
            parts.append(np.concatenate([g.incident_edges(3 * p + j) for p in sorted(bad_phys) for j in range(3)]))
        return np.unique(np.concatenate(parts))

    def reroute_around(self, k):
        """Cheapest elbow-feasible path for ``k`` on base costs that avoids the others, or None."""
        w = self.base[k].copy()
        w[self.blocked_by_others(k)] = np.inf
        res = solve_exact(
            self.g, None, [self.svc[k]],
            ExactConfig(time_limit=self.cfg.exact_fallback_time, dist=False),
            overrides={k: w},
        )
        return res

    def repair(self, max_rounds: Optional[int] = None) -> int:
        """Rip up and re-route conflicting services one at a time.

        A service is moved onto the cheapest path that keeps clear of every
        other current path, so each successful move removes all of its
        conflicts without creating new ones.  Returns the number of moves.
        """
        moves = 0
        rounds = max_rounds if max_rounds is not None else 2 * len(self.ids)
        for _ in range(rounds):
            conf = self.conflicts()
            if not conf:
                break
            count: dict = {}
            for k1, k2 in conf:
                count[k1] = count.get(k1, 0) + 1
                count[k2] = count.get(k2, 0) + 1
            moved = False
            for k in sorted(count, key=lambda k: (-count[k], k)):
                res = self.reroute_around(k)
                if res.solution is None:
                    continue
                self.set_path(k, self.g.arcs_to_nodes(res.solution.arcs[k]))
                moves += 1
                moved = True
                break
            if not moved:
                break
        return moves

    def polish(self, max_passes: int = 3) -> int:
        """Re-route one service at a time on base costs around the others.

        Keeps a new path only if it is cheaper and still conflict-free.
        Returns the number of accepted moves.
        """
        moves = 0
        for _ in range(max_passes):
            improved = False
            for k in self.ids:
                current = float(self.base[k][np.asarray(self.arcs[k], dtype=int) // 2].sum())
                res = self.reroute_around(k)
                if res.solution is None or res.objective >= current - 1e-9:
                    continue
                old = self.paths[k]
                self.set_path(k, self.g.arcs_to_nodes(res.solution.arcs[k]))
                if self.conflicts():
                    self.set_path(k, old)
                    continue
                moves += 1
                improved = True
            if not improved:
                break
        return moves

    def priority(self, k, fixed) -> tuple:
        length = _path_length(self.g, self.arcs[k]) if self.cfg.priority == "length" else 0.0
        return (0 if k in fixed else 1, length, k)


def _h2_result(st, base_costs, cfg, t0, **meta) -> Solution:
    moves = st.polish() if cfg.polish else 0
    sol = Solution(arcs={k: list(st.arcs[k]) for k in st.ids}, status="Feasible")
    sol.objective, sol.breakdown = objective(sol, base_costs)
    sol.meta.update(method="h2", fallback=False, exact_fallbacks=st.exact_fallbacks, polish_moves=moves, repair_moves=0)
    sol.meta.update(meta)
    sol.meta["time"] = time.perf_counter() - t0
    return sol


def run_h2(g: RoutingGraph, base_costs, services, config: Optional[H2Config] = None, scenario=None) -> Solution:
    """Decomposition matheuristic: route services alone, inflate conflicts, repeat."""
    cfg = config or H2Config()
    t0 = time.perf_counter()
    services = list(services)
    st = _H2State(g, base_costs, services, cfg)
    k0 = list(st.ids)
    k_it = list(k0)
    types = cfg.iteration_types()
    for it, kind in enumerate(types, 1):
        if kind == "seq":
            k_it = list(k0)
            remaining = list(k0)
            for k in k_it:
                st.set_path(k, st.route(k))
                remaining.remove(k)
                for k2 in remaining:
                    st.scale_cost(k2, st.seq_edges(k, k2))
        else:
            st.route_many(k_it)
        conf = st.conflicts()
        log.info("h2 iteration %d (%s): routed=%d conflicts=%d", it, kind, len(k_it), len(conf))
        if not conf:
            return _h2_result(st, base_costs, cfg, t0, iterations=it)
        if kind == "par":
            for k in k_it:
                for k1, k2 in conf:
                    if k in (k1, k2):
                        other = k2 if k == k1 else k1
                        st.raise_cost(k, st.conflict_edges(k, other))
        elif kind == "cluster":
            fixed = set(k0) - set(k_it)
            order = sorted(k0, key=lambda k: st.priority(k, fixed))
            rank = {k: i for i, k in enumerate(order)}
            nxt = set()
            for k1, k2 in conf:
                nxt.add(k2 if rank[k1] < rank[k2] else k1)
            for k in nxt:
                for k1, k2 in conf:
                    if k in (k1, k2):
                        other = k2 if k == k1 else k1
                        if other not in nxt:
                            st.raise_cost(k, st.conflict_edges(k, other))
            k_it = [k for k in k0 if k in nxt]
        else:
            k_it = list(k0)

    if cfg.repair:
        moves = st.repair()
        if not st.conflicts():
            log.info("h2: repaired the remaining conflicts with %d re-routes", moves)
            return _h2_result(st, base_costs, cfg, t0, iterations=cfg.maxit, repair_moves=moves)

    if cfg.fallback_density:
        scenario = scenario if scenario is not None else getattr(base_costs, "scenario", None)
        if scenario is None:
            raise HeuristicFailure("fallback density needs the scenario")
        log.info("h2: no conflict-free solution in %d iterations, retrying at density %d", cfg.maxit, cfg.fallback_density)
        sol = _coarse_fallback(g, base_costs, services, cfg, scenario)
        sol.meta["time"] = time.perf_counter() - t0
        return sol
    raise HeuristicFailure(f"no conflict-free solution within {cfg.maxit} iterations")


def spacing_for_density(scenario, density: int) -> float:
    if density < 2:
        raise ValueError("density must be at least 2")
    return float(max(scenario.region.size)) / (density - 1)


def map_coarse_solution(coarse: RoutingGraph, fine: RoutingGraph, sol: Solution) -> Solution:
    """Re-express a solution on a coarser lattice as arcs of the finer one."""
    fxyz = fine.physical.coords
    out = {}
    for k, arcs in sol.arcs.items():
        fine_arcs = []
        for a in arcs:
            u, v = int(coarse.arc_tail(a)), int(coarse.arc_head(a))
            pu = fine.physical.node_at(coarse.physical.coords[u // 3])
            pv = fine.physical.node_at(coarse.physical.coords[v // 3])
            if u // 3 == v // 3:
                fine_arcs.append(fine.arc_between(3 * pu + u % 3, 3 * pu + v % 3))
                continue
            ax = u % 3
            a_pt, b_pt = fxyz[pu], fxyz[pv]
            other = [i for i in range(3) if i != ax]
            lo, hi = min(a_pt[ax], b_pt[ax]), max(a_pt[ax], b_pt[ax])
            on = np.nonzero(
                np.all(fxyz[:, other] == a_pt[other], axis=1) & (fxyz[:, ax] >= lo) & (fxyz[:, ax] <= hi)
            )[0]
            on = on[np.argsort(fxyz[on, ax])]
            if fxyz[pu, ax] > fxyz[pv, ax]:
                on = on[::-1]
            for x, y in zip(on[:-1], on[1:]):
                fine_arcs.append(fine.arc_between(3 * int(x) + ax, 3 * int(y) + ax))
        out[k] = fine_arcs
    return Solution(arcs=out, status=sol.status, meta=dict(sol.meta))


def _coarse_fallback(g, base_costs, services, cfg, scenario) -> Solution:
    coarse_sc = dataclasses.replace(
        scenario,
        spacing=spacing_for_density(scenario, cfg.fallback_density),
        proximity_radius=scenario.rho,
    )
    cg = build_routing_graph(coarse_sc)
    cc = EdgeCostTable(cg, coarse_sc)
    ccfg = dataclasses.replace(cfg, fallback_density=None)
    coarse_sol = run_h2(cg, cc, services, ccfg)
    sol = map_coarse_solution(cg, g, coarse_sol)
    sol.objective, sol.breakdown = objective(sol, base_costs)
    sol.meta.update(method="h2", fallback=True, fallback_density=cfg.fallback_density)
    return sol


# ---------------------------------------------------------------------------
# H1


def _chebyshev_to_segments(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Chebyshev distance from each point to the nearest axis-aligned segment."""
    if not len(a):
        return np.full(len(points), np.inf)
    lo = np.minimum(a, b)[None]
    hi = np.maximum(a, b)[None]
    p = points[:, None]
    gap = np.maximum(np.maximum(lo - p, p - hi), 0.0)
    return gap.max(axis=2).min(axis=1)


def tube_distances(g: RoutingGraph, arcs, init_sol=()) -> np.ndarray:
    """Per physical node, the tube half-width needed to include it."""
    xyz = g.physical.coords
    e = np.asarray(arcs, dtype=int) // 2
    if len(e):
        e = e[~g.is_virtual[e]]
    d = _chebyshev_to_segments(xyz, g.seg_a[e], g.seg_b[e]) if len(e) else np.full(len(xyz), np.inf)
    for box in init_sol:
        inside = np.all((xyz >= np.asarray(box.lo)) & (xyz <= np.asarray(box.hi)), axis=1)
        d[inside] = 0.0
    # path nodes are always inside, even a path made of a single elbow
    for a in arcs:
        d[int(g.arc_tail(a)) // 3] = 0.0
        d[int(g.arc_head(a)) // 3] = 0.0
    return d


def allowed_mask(g: RoutingGraph, node_ok: np.ndarray) -> np.ndarray:
    pe = g.physical.edges
    phys = node_ok[pe[:, 0]] & node_ok[pe[:, 1]]
    virt = np.repeat(node_ok, 3)
    return np.concatenate([phys, virt])


def run_h1(g: RoutingGraph, costs, services, config: Optional[H1Config] = None, exact_engine=solve_exact) -> Solution:
    """Tube restriction matheuristic.

    Each service is first routed alone; the joint model is then solved with
    every service restricted to a box tube around its solo path, and the
    tubes grow until the restricted model is feasible.
    """
    cfg = config or H1Config()
    t0 = time.perf_counter()
    services = list(services)
    ids = [s.id for s in services]
    spacing = float(np.min(g.physical.spacing)) if cfg.increment is None else None
    inc = cfg.increment if cfg.increment is not None else spacing

    solo = {}
    for s in services:
        r = exact_engine(g, costs, [s], ExactConfig(time_limit=cfg.time_limit, dist=False))
        if r.status == "Infeasible":
            raise InfeasibleScenarioError(f"service {s.id} has no elbow-feasible path")
        if r.solution is None:
            raise HeuristicFailure(f"service {s.id}: solo route timed out")
        solo[s.id] = r.solution.arcs[s.id]

    dist = {s.id: tube_distances(g, solo[s.id], cfg.init_sol.get(s.id, ())) for s in services}
    delta = cfg.initial_delta(services)
    full_n = g.n_arcs * len(ids)
    prev = None
    rounds = 0
    for _ in range(cfg.max_rounds):
        masks = {k: allowed_mask(g, dist[k] <= delta[k]) & g.allowed[k] for k in ids}
        key = tuple(np.packbits(masks[k]).tobytes() for k in ids)
        if key == prev:
            # jump to the next growth step that admits a new node
            steps = []
            for k in ids:
                beyond = dist[k][dist[k] > delta[k]]
                if beyond.size:
                    steps.append(max(1, math.ceil((beyond.min() - delta[k]) / inc - 1e-9)))
            if not steps:
                break
            n = min(steps)
            delta = {k: v + n * inc for k, v in delta.items()}
            continue
        prev = key
        rounds += 1
        n_vars = int(sum(2 * m.sum() for m in masks.values()))
        res = exact_engine(
            g, costs, services,
            ExactConfig(time_limit=cfg.time_limit, node_limit=cfg.node_limit),
            allowed=masks,
        )
        log.info("h1 round %d: delta=%s vars=%d/%d status=%s", rounds,
                 {k: round(v, 6) for k, v in delta.items()}, n_vars, full_n, res.status)
        if res.solution is not None:
            sol = res.solution
            sol.status = "Feasible"
            sol.meta.update(
                method="h1", rounds=rounds, delta=dict(delta), restricted_vars=n_vars, full_vars=full_n,
                exact_status=res.status, time=time.perf_counter() - t0,
            )
            return sol
        everything = all(bool(np.all(masks[k] == g.allowed[k])) for k in ids)
        if everything:
            if res.status == "Infeasible":
                raise InfeasibleScenarioError("restricted model infeasible on the whole graph")
            raise HeuristicFailure("time limit reached on the whole graph without a solution")
        delta = {k: v + inc for k, v in delta.items()}
    raise HeuristicFailure("tube growth did not reach a feasible model")
