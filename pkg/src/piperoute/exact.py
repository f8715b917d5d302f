"""Exact solution of the routing model by branch-and-bound with lazy cuts.

Each tree node fixes some arcs to zero per service.  Its relaxation drops
the capacity, clearance and elbow constraints, so it decomposes into one
shortest path per service whose total cost is a valid lower bound.  A
relaxation solution that passes all checks is an incumbent; otherwise the
first violated constraint (shared nodes, then clearance, then elbows) is
resolved by a two-way disjunction on arc fixings.
"""
from __future__ import annotations

import heapq
import itertools
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geometry import segment_distance_many
from .graph import RoutingGraph
from .paths import elbow_shortest_path, shortest_path_arcs
from .scenario import Service, pair_clearance
from .solution import Solution

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Cut:
    """A separated clearance (``Dist``) or reinforced elbow (``ElbowR``) row.

    ``Dist``: if service ``service`` uses non-virtual ``arc`` then no other
    service may use an arc closer than their pair clearance.
    ``ElbowR``: service ``service`` uses at most one virtual arc over the
    physical nodes in ``nodes``.
    """

    kind: str
    service: int
    arc: int = -1
    nodes: tuple = ()
    big_m: float = 0.0

    @property
    def key(self) -> tuple:
        return (self.kind, self.service, self.arc, self.nodes)

    def elbow_arcs(self, g: RoutingGraph) -> np.ndarray:
        edges = np.concatenate([g.virtual_edges_at(p) for p in self.nodes])
        return np.sort(np.concatenate([2 * edges, 2 * edges + 1]))

    def conflict_arcs(self, g: RoutingGraph, services) -> dict:
        return dist_conflict_arcs(g, self.arc, self.service, services)

    def lhs_rhs(self, g: RoutingGraph, solution: Solution, services) -> tuple:
        """Left side and right side of the row evaluated at ``solution``."""
        if self.kind == "ElbowR":
            group = set(self.elbow_arcs(g).tolist())
            used = sum(1 for a in solution.arcs.get(self.service, ()) if a in group)
            return used, 1
        active = int(self.arc in set(solution.arcs.get(self.service, ())))
        lhs = 0
        for k2, arcs in self.conflict_arcs(g, services).items():
            lhs += len(set(arcs.tolist()) & set(solution.arcs.get(k2, ())))
        return lhs, self.big_m * (1 - active)

    def satisfied_by(self, g: RoutingGraph, solution: Solution, services) -> bool:
        lhs, rhs = self.lhs_rhs(g, solution, services)
        return lhs <= rhs


@dataclass
class ExactConfig:
    time_limit: float = 60.0
    node_limit: Optional[int] = None
    # "independent", None, or a Solution to seed the incumbent
    warm_start: object = "independent"
    dist: bool = True
    elbow: bool = True
    log_every: int = 1000
    # "runs": per-service paths already respect consecutive elbow spacing;
    # "plain": unconstrained shortest paths, elbows enforced by cuts only
    relaxation: str = "runs"

    def __post_init__(self):
        if self.relaxation not in ("runs", "plain"):
            raise ValueError(f"unknown relaxation {self.relaxation!r}")


@dataclass
class SolveResult:
    status: str  # Optimal, Feasible, Infeasible, TimeLimit
    solution: Optional[Solution]
    lower_bound: float
    nodes: int = 0
    cuts: dict = field(default_factory=dict)
    wall_time: float = 0.0
    cut_pool: list = field(default_factory=list)

    @property
    def objective(self) -> float:
        return self.solution.objective if self.solution is not None else math.inf

    @property
    def gap(self) -> Optional[float]:
        if self.solution is None or not math.isfinite(self.lower_bound):
            return None
        if self.status == "Optimal":
            return 0.0
        inc = self.solution.objective
        if inc <= 0:
            return 0.0
        return max(0.0, (inc - self.lower_bound) / inc)


def _svc_map(services) -> dict:
    return {s.id: s for s in services}


def _cube_edge_count(g: RoutingGraph, center, half: float) -> int:
    """Edges meeting the closed cube of half-side ``half`` around ``center``."""
    hits = g.edge_tree.query_ball_point(center, half + g.max_half_length + 1e-9, p=np.inf)
    if not hits:
        return 0
    hits = np.asarray(hits)
    lo = np.minimum(g.seg_a[hits], g.seg_b[hits])
    hi = np.maximum(g.seg_a[hits], g.seg_b[hits])
    c = np.asarray(center, float)
    ok = np.all((lo <= c + half) & (hi >= c - half), axis=1)
    return int(ok.sum())


def big_M(g: RoutingGraph, a: int, k: int, services) -> float:
    """Big-M for the clearance row of arc ``a`` and service ``k``."""
    svc = _svc_map(services)
    others = [s for s in services if s.id != k]
    if not others:
        return 1.0
    r = max(pair_clearance(svc[k], s) for s in others)
    e = a // 2
    half = (g.edge_length[e] + 2 * r) / 2
    n = _cube_edge_count(g, g.edge_mid[e], half)
    return float(2 * (len(services) - 1) * n + 1)


def dist_conflict_arcs(g: RoutingGraph, a: int, k: int, services) -> dict:
    """Arcs of every other service lying closer to ``a`` than the pair clearance."""
    svc = _svc_map(services)
    e = a // 2
    out = {}
    for s in services:
        if s.id == k:
            continue
        edges = g.edges_near_segments(g.seg_a[e], g.seg_b[e], pair_clearance(svc[k], s))
        out[s.id] = np.sort(np.concatenate([2 * edges, 2 * edges + 1]))
    return out


# ---------------------------------------------------------------------------
# violation detection shared by separation and branching


def dist_violations(g: RoutingGraph, arcs_by_k: dict, svc: dict) -> list:
    """``(d, k, a, k2, a2)`` for non-virtual ``a`` of k closer than allowed to ``a2`` of k2."""
    out = []
    ids = sorted(arcs_by_k)
    for k in ids:
        arcs = np.asarray(arcs_by_k[k], dtype=int)
        if not len(arcs):
            continue
        arcs = arcs[~g.is_virtual[arcs // 2]]
        for k2 in ids:
            if k2 == k or not len(arcs_by_k[k2]):
                continue
            arcs2 = np.asarray(arcs_by_k[k2], dtype=int)
            r = pair_clearance(svc[k], svc[k2])
            e1, e2 = arcs // 2, arcs2 // 2
            d = segment_distance_many(
                g.seg_a[e1][:, None], g.seg_b[e1][:, None], g.seg_a[e2][None], g.seg_b[e2][None]
            )
            for i, j in zip(*np.nonzero(d < r)):
                out.append((float(d[i, j]), k, int(arcs[i]), k2, int(arcs2[j])))
    return out


def _elbow_sequence(g: RoutingGraph, arcs) -> list:
    """``(arc, physical node)`` of each virtual arc in path order."""
    arcs = np.asarray(arcs, dtype=int)
    if not len(arcs):
        return []
    virt = g.is_virtual[arcs // 2]
    return [(int(a), int(g.edge_node[a // 2])) for a in arcs[virt]]


def _elbow_violations(g: RoutingGraph, arcs, limit: float, consecutive_first: bool = True) -> list:
    """``(d, p, q)`` pairs of elbow nodes (in path order) no farther apart than ``limit``."""
    seq = _elbow_sequence(g, arcs)
    coords = g.physical.coords
    out = []
    for (a1, p), (a2, q) in zip(seq[:-1], seq[1:]):
        d = float(np.linalg.norm(coords[p] - coords[q]))
        if d <= limit:
            out.append((d, p, q))
    if out or not consecutive_first:
        return out
    # non-consecutive pairs still violate the pairwise elbow rows
    for i, j in itertools.combinations(range(len(seq)), 2):
        if j == i + 1:
            continue
        p, q = seq[i][1], seq[j][1]
        d = float(np.linalg.norm(coords[p] - coords[q]))
        if d <= limit:
            out.append((d, p, q))
    return out


def separate_dist(g: RoutingGraph, solution: Solution, services) -> list:
    svc = _svc_map(services)
    cuts, seen = [], set()
    for d, k, a, k2, a2 in dist_violations(g, solution.arcs, svc):
        key = ("Dist", k, a)
        if key in seen:
            continue
        seen.add(key)
        cuts.append(Cut("Dist", k, arc=a, big_m=big_M(g, a, k, services)))
    return cuts


def separate_elbow(g: RoutingGraph, solution: Solution, services) -> list:
    cuts, seen = [], set()
    for s in services:
        arcs = solution.arcs.get(s.id, [])
        _check_walk(g, arcs)
        for d, p, q in _elbow_violations(g, arcs, s.elbow_min):
            nodes = (p,) if p == q else tuple(sorted((p, q)))
            key = ("ElbowR", s.id, -1, nodes)
            if key in seen:
                continue
            seen.add(key)
            cuts.append(Cut("ElbowR", s.id, nodes=nodes))
    return cuts


def _check_walk(g: RoutingGraph, arcs) -> None:
    if len(arcs) < 2:
        return
    heads = g.arc_head(arcs[:-1])
    tails = g.arc_tail(arcs[1:])
    if np.any(heads != tails):
        raise RuntimeError("path is not a contiguous walk")


# ---------------------------------------------------------------------------
# branch and bound


@dataclass
class _Node:
    bound: float
    forbidden: dict  # service id -> frozenset of arc ids
    paths: dict  # service id -> node list
    costs: dict  # service id -> path cost
    depth: int = 0


class _Engine:
    def __init__(self, g, services, weights, cfg):
        self.g = g
        self.services = list(services)
        self.svc = _svc_map(services)
        self.ids = [s.id for s in services]
        self.weights = weights
        self.arc_weights = {k: np.repeat(w, 2) for k, w in weights.items()}
        self.cfg = cfg
        self.phys_incident = {}

    def route(self, k, forbidden):
        """Relaxation for service ``k`` with the ``forbidden`` arcs removed."""
        w = self.arc_weights[k]
        if forbidden:
            w = w.copy()
            w[np.fromiter(forbidden, dtype=int, count=len(forbidden))] = np.inf
        s, t = self.g.terminals[k]
        if self.cfg.elbow and self.cfg.relaxation == "runs":
            return elbow_shortest_path(self.g, w, s, t, self.svc[k].elbow_min)
        return shortest_path_arcs(self.g, w, s, t)

    @staticmethod
    def _arcs(edges):
        edges = np.asarray(list(edges), dtype=int)
        return frozenset(np.concatenate([2 * edges, 2 * edges + 1]).tolist())

    def incident_phys(self, p):
        got = self.phys_incident.get(p)
        if got is None:
            got = self._arcs(np.concatenate([self.g.incident_edges(3 * p + i) for i in range(3)]))
            self.phys_incident[p] = got
        return got

    def ball(self, point, r):
        return self._arcs(self.g.edges_near_segments(point, point, r))

    def near_segment(self, e, r):
        return self._arcs(self.g.edges_near_segments(self.g.seg_a[e], self.g.seg_b[e], r))

    def conflict(self, arcs_by_k):
        """Branching disjunction for the first violated constraint, or None."""
        g = self.g
        ids = self.ids
        # 0. a relaxed walk that revisits a node: keep one of its two entries
        for k in ids:
            nodes = g.arcs_to_nodes(arcs_by_k[k])
            seen = {}
            for i, v in enumerate(nodes):
                if v in seen:
                    second = arcs_by_k[k][i - 1]
                    j = seen[v]
                    if j == 0:
                        return [(k, frozenset([second]))]
                    return [(k, frozenset([arcs_by_k[k][j - 1]])), (k, frozenset([second]))]
                seen[v] = i
        # 1. shared nodes
        shared = []
        for k1, k2 in itertools.combinations(ids, 2):
            n1 = g.arcs_to_nodes(arcs_by_k[k1])
            n2 = g.arcs_to_nodes(arcs_by_k[k2])
            if self.cfg.dist:
                common = set(v // 3 for v in n1) & set(v // 3 for v in n2)
            else:
                common = set(n1) & set(n2)
            for v in common:
                shared.append((v, k1, k2))
        if shared:
            v, k1, k2 = min(shared)
            if self.cfg.dist:
                r = pair_clearance(self.svc[k1], self.svc[k2])
                return [(k1, self.incident_phys(v)), (k2, self.ball(g.physical.coords[v], r))]
            inc = self._arcs(g.incident_edges(v))
            return [(k1, inc), (k2, inc)]
        # 2. clearance between services
        if self.cfg.dist:
            viol = dist_violations(g, arcs_by_k, self.svc)
            if viol:
                d, k, a, k2, a2 = min(
                    viol, key=lambda x: (x[0], min(g.arc_tail(x[2]), g.arc_head(x[2])) // 3, x[1], x[2], x[4])
                )
                r = pair_clearance(self.svc[k], self.svc[k2])
                e, e2 = a // 2, a2 // 2
                best = None
                for v in (int(g.edge_u[e]), int(g.edge_v[e])):
                    p = v // 3
                    dp = float(
                        segment_distance_many(g.physical.coords[p], g.physical.coords[p], g.seg_a[e2], g.seg_b[e2])
                    )
                    if dp < r and (best is None or (dp, p) < best):
                        best = (dp, p)
                if best is not None:
                    p = best[1]
                    return [(k, self.incident_phys(p)), (k2, self.ball(g.physical.coords[p], r))]
                return [(k, self._arcs([e])), (k2, self.near_segment(e, r))]
        # 3. elbow spacing
        if self.cfg.elbow:
            viol = []
            for k in ids:
                for d, p, q in _elbow_violations(g, arcs_by_k[k], self.svc[k].elbow_min):
                    viol.append((d, min(p, q), k, p, q))
            if viol:
                d, _, k, p, q = min(viol)
                if p != q:
                    return [(k, self._arcs(g.virtual_edges_at(p))), (k, self._arcs(g.virtual_edges_at(q)))]
                at_p = g.virtual_edges_at(p).tolist()
                used = sorted({a // 2 for a in arcs_by_k[k]} & set(at_p))
                first = used[0]
                return [(k, self._arcs([first])), (k, self._arcs([e for e in at_p if e != first]))]
        return None


def _independent_warm_start(g, services, weights, cfg, deadline):
    """Per-service optimum with elbow rows only, ignoring other services."""
    paths, total = {}, 0.0
    for s in services:
        sub = ExactConfig(
            time_limit=max(0.0, deadline - time.perf_counter()),
            warm_start=None,
            dist=False,
            elbow=cfg.elbow,
            node_limit=cfg.node_limit,
        )
        res = _solve(g, [s], {s.id: weights[s.id]}, sub)
        if res.solution is None:
            return None, -math.inf if res.status != "Infeasible" else math.inf
        paths[s.id] = res.solution.arcs[s.id]
        total += res.solution.objective if res.status == "Optimal" else res.lower_bound
    return paths, total


def _cutoff(inc_val: float, tol: float = 1e-9) -> float:
    if not math.isfinite(inc_val):
        return math.inf
    return inc_val - tol * max(1.0, abs(inc_val))


def _path_cost(w, arcs) -> float:
    # edge weights, so either orientation costs the same
    return float(sum(w[a // 2] for a in arcs))


def _solve(g, services, weights, cfg: ExactConfig) -> SolveResult:
    t0 = time.perf_counter()
    deadline = t0 + cfg.time_limit
    eng = _Engine(g, services, weights, cfg)
    ids = eng.ids
    pool: dict = {}
    counts = {"Dist": 0, "ElbowR": 0}

    incumbent, inc_val = None, math.inf
    lb_floor = -math.inf
    if cfg.warm_start == "independent" and len(ids) > 1:
        paths, lb = _independent_warm_start(g, services, weights, cfg, deadline)
        if paths is None and lb == math.inf:
            return SolveResult("Infeasible", None, math.inf, wall_time=time.perf_counter() - t0)
        if paths is not None:
            lb_floor = lb
            if eng.conflict(paths) is None:
                incumbent = paths
                inc_val = sum(_path_cost(weights[k], paths[k]) for k in ids)
    elif isinstance(cfg.warm_start, Solution):
        paths = {k: list(cfg.warm_start.arcs[k]) for k in ids}
        if eng.conflict(paths) is None:
            incumbent = paths
            inc_val = sum(_path_cost(weights[k], paths[k]) for k in ids)

    root_paths, root_costs = {}, {}
    for k in ids:
        c, p = eng.route(k, frozenset())
        if p is None:
            return SolveResult("Infeasible", None, math.inf, wall_time=time.perf_counter() - t0)
        root_paths[k], root_costs[k] = p, c
    root = _Node(sum(root_costs.values()), {k: frozenset() for k in ids}, root_paths, root_costs)

    # best-bound order, with periodic dives to the deepest open node to find
    # incumbents early; both heaps share nodes and skip ones already expanded
    seq = itertools.count()
    best: list = []
    deep: list = []
    done: set = set()

    def push(nd):
        i = next(seq)
        heapq.heappush(best, (nd.bound, i, nd))
        heapq.heappush(deep, (-nd.depth, nd.bound, i, nd))

    push(root)
    n_nodes = 0
    status = None
    while True:
        while best and best[0][1] in done:
            heapq.heappop(best)
        if not best or best[0][0] >= _cutoff(inc_val):
            break
        if time.perf_counter() > deadline or (cfg.node_limit is not None and n_nodes >= cfg.node_limit):
            status = "limit"
            break
        dive = n_nodes % 2 == 1 if incumbent is None else n_nodes % 10 == 9
        item = None
        if dive:
            while deep and (deep[0][2] in done or deep[0][1] >= _cutoff(inc_val)):
                done.add(heapq.heappop(deep)[2])
            if deep:
                _, bound, i, node = heapq.heappop(deep)
                item = (bound, i, node)
        if item is None:
            item = heapq.heappop(best)
        bound, i, node = item
        done.add(i)
        n_nodes += 1
        arcs_by_k = {k: g.nodes_to_arcs(node.paths[k]) for k in ids}
        cand = Solution(arcs=arcs_by_k)
        new_cuts = []
        if cfg.dist and len(ids) > 1:
            new_cuts += [c for c in _separate_dist_keys(g, cand, eng.svc) if c.key not in pool]
        if cfg.elbow:
            new_cuts += [c for c in separate_elbow(g, cand, services) if c.key not in pool]
        for c in new_cuts:
            if c.kind == "Dist":
                c = Cut("Dist", c.service, arc=c.arc, big_m=big_M(g, c.arc, c.service, services))
            pool[c.key] = c
            counts[c.kind] += 1
        branch = eng.conflict(arcs_by_k)
        if branch is None:
            if bound < inc_val:
                incumbent, inc_val = arcs_by_k, bound
            continue
        for k, extra in branch:
            forb = node.forbidden[k] | extra
            if forb == node.forbidden[k]:
                continue
            c, p = eng.route(k, forb)
            if p is None:
                continue
            child = _Node(
                node.bound - node.costs[k] + c,
                {**node.forbidden, k: forb},
                {**node.paths, k: p},
                {**node.costs, k: c},
                node.depth + 1,
            )
            if child.bound < _cutoff(inc_val):
                push(child)
        if cfg.log_every and n_nodes % cfg.log_every == 0:
            open_min = min((b for b, j, _ in best if j not in done), default=math.inf)
            log.info(
                "nodes=%d open=%d bound=%.6g incumbent=%.6g cuts=%d",
                n_nodes, len(best), max(lb_floor, min(open_min, inc_val)), inc_val, len(pool),
            )

    wall = time.perf_counter() - t0
    if status == "limit":
        open_min = min((b for b, j, _ in best if j not in done), default=math.inf)
        lower = max(lb_floor, min(open_min, inc_val))
        st = "Feasible" if incumbent is not None else "TimeLimit"
    elif incumbent is not None:
        st, lower = "Optimal", inc_val
    else:
        st, lower = "Infeasible", math.inf
    sol = None
    if incumbent is not None:
        sol = Solution(
            arcs={k: list(incumbent[k]) for k in ids},
            objective=float(sum(_path_cost(weights[k], incumbent[k]) for k in ids)),
            status=st,
        )
    log.info("exact: status=%s nodes=%d bound=%.6g incumbent=%.6g time=%.2fs", st, n_nodes, lower, inc_val, wall)
    return SolveResult(st, sol, lower, nodes=n_nodes, cuts=counts, wall_time=wall, cut_pool=list(pool.values()))


def _separate_dist_keys(g, solution, svc):
    # cheap variant used inside the tree: big-M is filled in only for new cuts
    seen, out = set(), []
    for d, k, a, k2, a2 in dist_violations(g, solution.arcs, svc):
        if (k, a) not in seen:
            seen.add((k, a))
            out.append(Cut("Dist", k, arc=a))
    return out


def service_weights(g: RoutingGraph, costs, services, allowed=None, overrides=None) -> dict:
    """Edge weights per service with disallowed edges at ``inf``."""
    out = {}
    for s in services:
        if overrides is not None and s.id in overrides:
            w = np.array(overrides[s.id], dtype=float)
        else:
            w = np.array(costs.edge_costs(s.id), dtype=float)
        mask = g.allowed[s.id]
        if allowed is not None and s.id in allowed:
            mask = mask & allowed[s.id]
        w[~mask] = np.inf
        out[s.id] = w
    return out


def solve_exact(
    g: RoutingGraph,
    costs,
    services,
    config: Optional[ExactConfig] = None,
    allowed: Optional[dict] = None,
    overrides: Optional[dict] = None,
) -> SolveResult:
    """Solve the routing model to optimality (or until the limits bind).

    ``allowed`` restricts each service to an edge mask on top of its
    obstacle-clearance mask; ``overrides`` replaces a service's edge costs.
    """
    cfg = config or ExactConfig()
    services = list(services)
    for s in services:
        if s.id not in g.terminals:
            raise KeyError(f"service {s.id} has no terminals in the graph")
    weights = service_weights(g, costs, services, allowed, overrides)
    res = _solve(g, services, weights, cfg)
    if res.solution is not None and overrides is None and hasattr(costs, "breakdown"):
        from .costs import objective

        res.solution.objective, res.solution.breakdown = objective(res.solution, costs)
        res.solution.meta.update(method="exact", nodes=res.nodes, cuts=dict(res.cuts))
    return res


# ---------------------------------------------------------------------------
# MILP model export


@dataclass
class MasterModel:
    g: RoutingGraph
    costs: object
    services: list
    allowed: dict = field(default_factory=dict)

    @property
    def n_vars(self) -> int:
        return self.g.n_arcs * len(self.services)

    @property
    def n_active_vars(self) -> int:
        """Columns left after dropping arcs outside each service's mask."""
        return int(sum(np.count_nonzero(self.arc_mask(s.id)) for s in self.services))

    @property
    def n_constraints(self) -> int:
        """Capacity rows plus flow rows (one per node and service)."""
        return self.g.n_nodes * (1 + len(self.services))

    def column(self, k_index: int, a) -> int:
        return k_index * self.g.n_arcs + np.asarray(a)

    def arc_mask(self, k: int) -> np.ndarray:
        m = self.g.allowed[k]
        if k in self.allowed:
            m = m & self.allowed[k]
        return np.repeat(m, 2)


def build_master(g: RoutingGraph, costs, services, allowed: Optional[dict] = None) -> MasterModel:
    return MasterModel(g, costs, list(services), dict(allowed or {}))


def _b36(i: int, prefix: str) -> str:
    digits = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ"
    s = ""
    for _ in range(7):
        i, r = divmod(i, 36)
        s = digits[r] + s
    return prefix + s


def _num(v: float) -> str:
    v = float(v)
    if v == int(v) and abs(v) < 1e11:
        return str(int(v))
    for prec in range(12, 3, -1):
        s = f"{v:.{prec}g}"
        if len(s) <= 12:
            return s
    return f"{v:.5e}"[:12]


def _field_line(f1: str, f2: str, f3: str = "", f4: str = "", f5: str = "", f6: str = "") -> str:
    line = f" {f1:<2} {f2:<8}  {f3:<8}  {f4:>12}"
    if f5:
        line += f"   {f5:<8}  {f6:>12}"
    return line.rstrip()


def _all_cut_rows(model: MasterModel):
    """Every clearance and reinforced elbow row: ``(sense, rhs, cols, vals)``."""
    g, services = model.g, model.services
    kidx = {s.id: i for i, s in enumerate(services)}
    coords = g.physical.coords
    if len(services) > 1:
        for s in services:
            mask = model.arc_mask(s.id)
            phys_arcs = np.nonzero(mask & ~np.repeat(g.is_virtual, 2))[0]
            for a in phys_arcs:
                m = big_M(g, int(a), s.id, services)
                cols = [int(model.column(kidx[s.id], a))]
                vals = [m]
                for k2, arcs in dist_conflict_arcs(g, int(a), s.id, services).items():
                    arcs = arcs[model.arc_mask(k2)[arcs]]
                    cols.extend(model.column(kidx[k2], arcs).tolist())
                    vals.extend([1.0] * len(arcs))
                if len(cols) > 1:
                    yield "L", m, cols, vals
    tree = None
    for s in services:
        ki = kidx[s.id]
        for p in range(g.physical.n_nodes):
            group = Cut("ElbowR", s.id, nodes=(p,)).elbow_arcs(g)
            yield "L", 1.0, model.column(ki, group).tolist(), [1.0] * len(group)
        if s.elbow_min > 0:
            if tree is None:
                from scipy.spatial import cKDTree

                tree = cKDTree(coords)
            for p, q in sorted(tree.query_pairs(s.elbow_min + 1e-12)):
                if np.linalg.norm(coords[p] - coords[q]) > s.elbow_min:
                    continue
                group = Cut("ElbowR", s.id, nodes=(p, q)).elbow_arcs(g)
                yield "L", 1.0, model.column(ki, group).tolist(), [1.0] * len(group)


def _pool_cut_rows(model: MasterModel, cuts):
    g, services = model.g, model.services
    kidx = {s.id: i for i, s in enumerate(services)}
    for c in cuts:
        if c.kind == "ElbowR":
            group = c.elbow_arcs(g)
            yield "L", 1.0, model.column(kidx[c.service], group).tolist(), [1.0] * len(group)
        else:
            m = c.big_m or big_M(g, c.arc, c.service, services)
            cols, vals = [int(model.column(kidx[c.service], c.arc))], [m]
            for k2, arcs in c.conflict_arcs(g, services).items():
                cols.extend(model.column(kidx[k2], arcs).tolist())
                vals.extend([1.0] * len(arcs))
            yield "L", m, cols, vals


def export_model(model: MasterModel, include_all_cuts: bool, path, cuts=()) -> dict:
    """Write the model in fixed-format MPS.

    Column ``k * |A| + a`` is arc ``a`` of the k-th service; arcs outside a
    service's mask are fixed to zero.  Without ``include_all_cuts`` only the
    given ``cuts`` are written as extra rows.
    """
    g, services = model.g, model.services
    n_arcs, n_nodes, nk = g.n_arcs, g.n_nodes, len(services)
    arcs = np.arange(n_arcs)
    tails = g.arc_tail(arcs)
    heads = g.arc_head(arcs)

    rows_sense: list = []
    rows_rhs: list = []
    entries_r, entries_c, entries_v = [], [], []

    def add_row(sense, rhs):
        rows_sense.append(sense)
        rows_rhs.append(rhs)
        return len(rows_sense) - 1

    # node capacity: at most one service enters a node; a source counts as entered
    src_count = np.zeros(n_nodes)
    for s in services:
        src_count[g.terminals[s.id][0]] += 1
    cap0 = len(rows_sense)
    for i in range(n_nodes):
        add_row("L", 1.0 - src_count[i])
    for ki, s in enumerate(services):
        cols = model.column(ki, arcs)
        entries_r.append(cap0 + heads)
        entries_c.append(cols)
        entries_v.append(np.ones(n_arcs))
        s_node, t_node = g.terminals[s.id]
        flow0 = len(rows_sense)
        row_of = np.full(n_nodes, -1)
        inner = [i for i in range(n_nodes) if i not in (s_node, t_node)]
        row_of[inner] = flow0 + np.arange(len(inner))
        for _ in inner:
            add_row("E", 0.0)
        src = add_row("E", 1.0)
        snk = add_row("E", 1.0)
        out_rows = row_of[tails]
        in_rows = row_of[heads]
        m = out_rows >= 0
        entries_r.append(out_rows[m]); entries_c.append(cols[m]); entries_v.append(np.ones(m.sum()))
        m = in_rows >= 0
        entries_r.append(in_rows[m]); entries_c.append(cols[m]); entries_v.append(-np.ones(m.sum()))
        m = tails == s_node
        entries_r.append(np.full(m.sum(), src)); entries_c.append(cols[m]); entries_v.append(np.ones(m.sum()))
        m = heads == t_node
        entries_r.append(np.full(m.sum(), snk)); entries_c.append(cols[m]); entries_v.append(np.ones(m.sum()))

    extra = _all_cut_rows(model) if include_all_cuts else _pool_cut_rows(model, cuts)
    n_cut_rows = 0
    for sense, rhs, cols, vals in extra:
        r = add_row(sense, rhs)
        entries_r.append(np.full(len(cols), r))
        entries_c.append(np.asarray(cols, dtype=int))
        entries_v.append(np.asarray(vals, dtype=float))
        n_cut_rows += 1

    rr = np.concatenate(entries_r)
    cc = np.concatenate(entries_c)
    vv = np.concatenate(entries_v)
    order = np.lexsort((rr, cc))
    rr, cc, vv = rr[order], cc[order], vv[order]
    starts = np.searchsorted(cc, np.arange(model.n_vars + 1))

    obj = np.concatenate([model.costs.arc_costs(s.id) for s in services])
    fixed = np.concatenate([~model.arc_mask(s.id) for s in services])

    with open(path, "w") as fh:
        w = fh.write
        w("NAME          PRPS\n")
        w("ROWS\n")
        w(" N  COST\n")
        for i, sense in enumerate(rows_sense):
            w(f" {sense}  {_b36(i, 'R')}\n")
        w("COLUMNS\n")
        w("    MARKER                 'MARKER'                 'INTORG'\n")
        for j in range(model.n_vars):
            name = _b36(j, "C")
            items = [("COST", obj[j])] if obj[j] != 0 else []
            items += [(_b36(int(r), "R"), v) for r, v in zip(rr[starts[j]:starts[j + 1]], vv[starts[j]:starts[j + 1]])]
            if not items:
                items = [("COST", 0.0)]
            for t in range(0, len(items), 2):
                pair = items[t:t + 2]
                if len(pair) == 2:
                    w(_field_line("", name, pair[0][0], _num(pair[0][1]), pair[1][0], _num(pair[1][1])) + "\n")
                else:
                    w(_field_line("", name, pair[0][0], _num(pair[0][1])) + "\n")
        w("    MARKER                 'MARKER'                 'INTEND'\n")
        w("RHS\n")
        for i, rhs in enumerate(rows_rhs):
            if rhs != 0:
                w(_field_line("", "RHS", _b36(i, "R"), _num(rhs)) + "\n")
        w("BOUNDS\n")
        for j in range(model.n_vars):
            if fixed[j]:
                w(_field_line("FX", "BND", _b36(j, "C"), "0") + "\n")
            else:
                w(_field_line("UP", "BND", _b36(j, "C"), "1") + "\n")
        w("ENDATA\n")
    return {"columns": model.n_vars, "rows": len(rows_sense), "cut_rows": n_cut_rows}
