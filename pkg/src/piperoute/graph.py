"""Discretisation of the region into an exploded orthogonal grid graph.

Every physical node ``p`` becomes three co-located virtual nodes
``3p + axis``; physical edges attach to the virtual node matching their
axis, and three zero-length virtual edges per node model elbows.

Edge ids: physical edges come first (``0 .. Q-1``), then virtual edges
``Q + 3p + j`` with ``j`` indexing the pairs (X,Y), (X,Z), (Y,Z).
Arc ids: ``2e`` runs from the lower to the higher node id of edge ``e``,
``2e + 1`` the other way.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .geometry import Point3, Segment3, box_box_distance_many, segment_distance
from .scenario import AXES, InfeasibleScenarioError, Scenario, ScenarioError

VIRTUAL_PAIRS = ((0, 1), (0, 2), (1, 2))
_SNAP = 1e-9


@dataclass
class PhysicalGraph:
    coords: np.ndarray  # (P, 3), lexicographically sorted
    edges: np.ndarray  # (Q, 2), u < v
    axis: np.ndarray  # (Q,) 0/1/2
    spacing: np.ndarray  # (3,)
    lattice_shape: tuple
    # distance from each edge to the nearest non-exempt obstacle; -inf when
    # the edge runs through an obstacle interior, inf when there are none
    obstacle_gap: np.ndarray = None
    # edge meets an obstacle interior but is kept through a penetrable zone
    crosses_zone: np.ndarray = None

    def __post_init__(self):
        q = len(self.edges)
        if self.obstacle_gap is None:
            self.obstacle_gap = np.full(q, np.inf)
        if self.crosses_zone is None:
            self.crosses_zone = np.zeros(q, bool)

    @property
    def n_nodes(self) -> int:
        return len(self.coords)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def index(self) -> dict:
        return {tuple(np.round(c, 9)): i for i, c in enumerate(self.coords)}

    def node_at(self, p) -> int:
        return self.index[tuple(np.round(np.asarray(p, float), 9))]


def _axis_ticks(lo: float, hi: float, spacing: float) -> np.ndarray:
    n = int(math.floor((hi - lo) / spacing + _SNAP)) + 1
    return lo + spacing * np.arange(n)


def _lattice_edges(shape):
    nx, ny, nz = shape
    ids = np.arange(nx * ny * nz).reshape(shape)
    out, axes = [], []
    for ax in range(3):
        sl_a = [slice(None)] * 3
        sl_b = [slice(None)] * 3
        sl_a[ax] = slice(0, -1)
        sl_b[ax] = slice(1, None)
        a = ids[tuple(sl_a)].ravel()
        b = ids[tuple(sl_b)].ravel()
        out.append(np.stack([a, b], axis=1))
        axes.append(np.full(len(a), ax))
    return np.concatenate(out), np.concatenate(axes)


class _TerminalInserter:
    """Adds off-lattice points to the lattice with axis-parallel connectors."""

    def __init__(self, ticks):
        self.ticks = ticks
        self.extra_points: dict = {}
        self.extra_edges: list = []  # (point, point, axis)
        self.splits: dict = {}  # lattice edge key -> points on it

    def _on_lattice(self, v, ax) -> bool:
        t = self.ticks[ax]
        i = np.searchsorted(t, v - _SNAP)
        return i < len(t) and abs(t[i] - v) <= _SNAP

    def _nearest(self, v, ax) -> float:
        t = self.ticks[ax]
        return float(t[np.argmin(np.abs(t - v))])

    def attach(self, p) -> None:
        p = tuple(float(v) for v in p)
        off = [ax for ax in range(3) if not self._on_lattice(p[ax], ax)]
        if not off:
            return
        self.extra_points[p] = True
        if len(off) == 1:
            ax = off[0]
            t = self.ticks[ax]
            i = int(np.searchsorted(t, p[ax]))
            if i == 0 or i >= len(t):
                raise ScenarioError(f"terminal {p} lies outside the lattice span")
            key = (tuple(p[j] if j != ax else None for j in range(3)), ax, i)
            self.splits.setdefault(key, set()).add(p)
            return
        ax = off[0]
        q = list(p)
        q[ax] = self._nearest(p[ax], ax)
        q = tuple(q)
        self.extra_edges.append((p, q, ax))
        self.attach(q)

    def split_chains(self):
        """Chains of points replacing split lattice edges, keyed by (lo, hi)."""
        out = []
        for (fixed, ax, i), pts in self.splits.items():
            lo = list(fixed)
            hi = list(fixed)
            lo[ax] = float(self.ticks[ax][i - 1])
            hi[ax] = float(self.ticks[ax][i])
            chain = [tuple(lo)] + sorted(pts, key=lambda q: q[ax]) + [tuple(hi)]
            out.append((tuple(lo), tuple(hi), ax, chain))
        return out


def _edge_boxes(coords, edges):
    a = coords[edges[:, 0]]
    b = coords[edges[:, 1]]
    return np.minimum(a, b), np.maximum(a, b)


def _obstacle_gaps(scenario: Scenario, coords, edges):
    """Per-edge obstacle gap plus the penetrable-crossing flag."""
    lo, hi = _edge_boxes(coords, edges)
    gap = np.full(len(edges), np.inf)
    crosses = np.zeros(len(edges), bool)
    zones = scenario.penetrable_zones
    for ob in scenario.obstacles:
        olo, ohi = np.asarray(ob.lo), np.asarray(ob.hi)
        dist = box_box_distance_many(lo, hi, olo, ohi)
        interior = np.all((lo < ohi) & (hi > olo), axis=1)
        exempt = np.zeros(len(edges), bool)
        if zones:
            # the part of the edge inside the closed obstacle
            clo = np.maximum(lo, olo)
            chi = np.minimum(hi, ohi)
            for z in zones:
                zlo, zhi = np.asarray(z.lo), np.asarray(z.hi)
                meets = box_box_distance_many(lo, hi, zlo, zhi) == 0.0
                inside = np.all((clo >= zlo) & (chi <= zhi), axis=1) | (dist > 0)
                exempt |= meets & inside
        crosses |= interior & exempt
        d = np.where(interior, -np.inf, dist)
        gap = np.where(exempt, gap, np.minimum(gap, d))
    return gap, crosses


def build_grid(scenario: Scenario, spacing: float | None = None) -> PhysicalGraph:
    """Orthogonal lattice over the region with terminals and obstacle pruning.

    Edges closer to an obstacle than the smallest service clearance are
    dropped; the per-edge gap is retained so that stricter per-service masks
    can be derived later.
    """
    spacing = float(scenario.spacing if spacing is None else spacing)
    if not spacing > 0:
        raise ScenarioError("spacing must be positive")
    region = scenario.region
    ticks = [_axis_ticks(region.lo[i], region.hi[i], spacing) for i in range(3)]
    shape = tuple(len(t) for t in ticks)
    grid = np.stack(np.meshgrid(*ticks, indexing="ij"), axis=-1).reshape(-1, 3)
    lat_edges, lat_axis = _lattice_edges(shape)

    for s in scenario.services:
        for p in (s.source, s.destination):
            if scenario.in_obstacle_interior(p):
                raise ScenarioError(f"service {s.id}: terminal {tuple(p)} inside an obstacle")

    ins = _TerminalInserter(ticks)
    for s in scenario.services:
        ins.attach(s.source)
        ins.attach(s.destination)

    coords = grid
    edges = lat_edges
    axis = lat_axis
    if ins.extra_points:
        extra = np.array(sorted(ins.extra_points), float)
        coords = np.concatenate([grid, extra])
        lookup = {tuple(np.round(c, 9)): i for i, c in enumerate(coords)}

        def nid(p):
            return lookup[tuple(np.round(p, 9))]

        new_e, new_ax = [], []
        drop = set()
        for lo_p, hi_p, ax, chain in ins.split_chains():
            drop.add((nid(lo_p), nid(hi_p)))
            for p, q in zip(chain[:-1], chain[1:]):
                new_e.append((nid(p), nid(q)))
                new_ax.append(ax)
        for p, q, ax in ins.extra_edges:
            new_e.append((nid(p), nid(q)))
            new_ax.append(ax)
        if drop:
            keep = np.array([(int(u), int(v)) not in drop for u, v in edges])
            edges, axis = edges[keep], axis[keep]
        if new_e:
            edges = np.concatenate([edges, np.array(new_e, int)])
            axis = np.concatenate([axis, np.array(new_ax, int)])

    # drop nodes strictly inside obstacles (holes excepted)
    alive = np.ones(len(coords), bool)
    for ob in scenario.obstacles:
        inside = np.all((coords > np.asarray(ob.lo)) & (coords < np.asarray(ob.hi)), axis=1)
        for z in scenario.penetrable_zones:
            inside &= ~np.all((coords >= np.asarray(z.lo)) & (coords <= np.asarray(z.hi)), axis=1)
        alive &= ~inside

    # lexicographic (x, y, z) node order
    order = np.lexsort((coords[:, 2], coords[:, 1], coords[:, 0]))
    order = order[alive[order]]
    remap = np.full(len(coords), -1)
    remap[order] = np.arange(len(order))
    coords = coords[order]
    edges = remap[edges]
    ok = np.all(edges >= 0, axis=1)
    edges, axis = edges[ok], axis[ok]
    edges = np.sort(edges, axis=1)

    gap, crosses = _obstacle_gaps(scenario, coords, edges)
    if scenario.services:
        threshold = min(s.clearance for s in scenario.services)
        keep = gap >= threshold
    else:
        keep = gap >= 0
    edges, axis, gap, crosses = edges[keep], axis[keep], gap[keep], crosses[keep]
    eorder = np.lexsort((axis, edges[:, 1], edges[:, 0]))

    return PhysicalGraph(
        coords=coords,
        edges=edges[eorder],
        axis=axis[eorder],
        spacing=np.full(3, spacing),
        lattice_shape=shape,
        obstacle_gap=gap[eorder],
        crosses_zone=crosses[eorder],
    )


@dataclass
class RoutingGraph:
    """Exploded graph with its directed view and per-service data."""

    physical: PhysicalGraph
    edge_u: np.ndarray
    edge_v: np.ndarray
    is_virtual: np.ndarray
    edge_axis: np.ndarray  # -1 for virtual edges
    edge_node: np.ndarray  # physical node of a virtual edge, else -1
    seg_a: np.ndarray
    seg_b: np.ndarray
    terminals: dict = field(default_factory=dict)  # service id -> (s, t)
    allowed: dict = field(default_factory=dict)  # service id -> edge mask

    @property
    def n_nodes(self) -> int:
        return 3 * self.physical.n_nodes

    @property
    def n_edges(self) -> int:
        return len(self.edge_u)

    @property
    def n_arcs(self) -> int:
        return 2 * self.n_edges

    @property
    def n_physical_edges(self) -> int:
        return self.physical.n_edges

    @cached_property
    def node_coords(self) -> np.ndarray:
        return np.repeat(self.physical.coords, 3, axis=0)

    @cached_property
    def edge_length(self) -> np.ndarray:
        return np.linalg.norm(self.seg_b - self.seg_a, axis=1)

    @cached_property
    def edge_mid(self) -> np.ndarray:
        return 0.5 * (self.seg_a + self.seg_b)

    def virtual_node(self, phys: int, axis: int) -> int:
        return 3 * phys + axis

    def segment(self, e: int) -> Segment3:
        return Segment3(Point3(*self.seg_a[e]), Point3(*self.seg_b[e]))

    # arcs ---------------------------------------------------------------
    def arc_tail(self, a):
        a = np.asarray(a)
        e = a // 2
        return np.where(a % 2 == 0, self.edge_u[e], self.edge_v[e])

    def arc_head(self, a):
        a = np.asarray(a)
        e = a // 2
        return np.where(a % 2 == 0, self.edge_v[e], self.edge_u[e])

    def arc_is_virtual(self, a):
        return self.is_virtual[np.asarray(a) // 2]

    @cached_property
    def _csr(self):
        """Directed adjacency; entry ``i`` of the CSR data is arc ``csr_arc[i]``."""
        tails = np.concatenate([self.edge_u, self.edge_v])
        heads = np.concatenate([self.edge_v, self.edge_u])
        arcs = np.concatenate([2 * np.arange(self.n_edges), 2 * np.arange(self.n_edges) + 1])
        order = np.lexsort((heads, tails))
        tails, heads, arcs = tails[order], heads[order], arcs[order]
        indptr = np.searchsorted(tails, np.arange(self.n_nodes + 1))
        return indptr, heads, arcs

    @property
    def csr_arc(self) -> np.ndarray:
        return self._csr[2]

    def csr_matrix(self, arc_weights: np.ndarray) -> csr_matrix:
        indptr, heads, arcs = self._csr
        m = csr_matrix((arc_weights[arcs], heads, indptr), shape=(self.n_nodes, self.n_nodes))
        return m

    def arc_between(self, u: int, v: int) -> int:
        indptr, heads, arcs = self._csr
        lo, hi = indptr[u], indptr[u + 1]
        j = lo + np.searchsorted(heads[lo:hi], v)
        if j >= hi or heads[j] != v:
            raise KeyError((u, v))
        return int(arcs[j])

    def neighbors(self, u: int) -> np.ndarray:
        indptr, heads, _ = self._csr
        return heads[indptr[u]:indptr[u + 1]]

    def incident_edges(self, u: int) -> np.ndarray:
        indptr, _, arcs = self._csr
        return arcs[indptr[u]:indptr[u + 1]] // 2

    def nodes_to_arcs(self, nodes) -> list:
        return [self.arc_between(int(u), int(v)) for u, v in zip(nodes[:-1], nodes[1:])]

    def arcs_to_nodes(self, arcs) -> list:
        if not len(arcs):
            return []
        return [int(self.arc_tail(arcs[0]))] + [int(x) for x in self.arc_head(list(arcs))]

    def virtual_edges_at(self, phys: int) -> np.ndarray:
        return self.n_physical_edges + 3 * phys + np.arange(3)

    @cached_property
    def edge_tree(self) -> cKDTree:
        return cKDTree(self.edge_mid)

    @cached_property
    def max_half_length(self) -> float:
        return float(self.edge_length.max() / 2) if self.n_edges else 0.0

    def edges_near_segments(self, a, b, radius: float, strict: bool = True) -> np.ndarray:
        """Edge ids whose segment lies within ``radius`` of any of the segments."""
        from .geometry import segment_distance_many

        a = np.atleast_2d(np.asarray(a, float))
        b = np.atleast_2d(np.asarray(b, float))
        mids = 0.5 * (a + b)
        halves = np.linalg.norm(b - a, axis=1) / 2
        found = set()
        for i, hits in enumerate(
            self.edge_tree.query_ball_point(mids, radius + halves + self.max_half_length + 1e-9)
        ):
            if not hits:
                continue
            hits = np.asarray(hits)
            d = segment_distance_many(self.seg_a[hits], self.seg_b[hits], a[i], b[i])
            sel = d < radius if strict else d <= radius
            found.update(hits[sel].tolist())
        return np.array(sorted(found), dtype=int)

    def collapse(self) -> tuple:
        """Physical ``(coords, edges, axis)`` recovered from the exploded graph."""
        phys = ~self.is_virtual
        u = self.edge_u[phys] // 3
        v = self.edge_v[phys] // 3
        return self.physical.coords.copy(), np.stack([u, v], axis=1), self.edge_axis[phys].copy()

    def reachable(self, k: int) -> bool:
        s, t = self.terminals[k]
        w = np.where(self.allowed[k][np.arange(self.n_arcs) // 2], 1.0, 0.0)
        m = self.csr_matrix(w)
        m.eliminate_zeros()
        _, labels = connected_components(m, directed=False)
        return labels[s] == labels[t]


def explode(pg: PhysicalGraph) -> RoutingGraph:
    p = pg.n_nodes
    eu = 3 * pg.edges[:, 0] + pg.axis
    ev = 3 * pg.edges[:, 1] + pg.axis
    base = 3 * np.arange(p)
    # interleave so virtual edge Q + 3p + j belongs to physical node p
    vu = np.stack([base + i for i, _ in VIRTUAL_PAIRS], axis=1).ravel()
    vv = np.stack([base + j for _, j in VIRTUAL_PAIRS], axis=1).ravel()
    vnode = np.repeat(np.arange(p), 3)
    n_v = len(vu)
    edge_u = np.concatenate([eu, vu])
    edge_v = np.concatenate([ev, vv])
    seg_a = np.concatenate([pg.coords[pg.edges[:, 0]], pg.coords[vnode]])
    seg_b = np.concatenate([pg.coords[pg.edges[:, 1]], pg.coords[vnode]])
    return RoutingGraph(
        physical=pg,
        edge_u=edge_u,
        edge_v=edge_v,
        is_virtual=np.concatenate([np.zeros(pg.n_edges, bool), np.ones(n_v, bool)]),
        edge_axis=np.concatenate([pg.axis, np.full(n_v, -1)]),
        edge_node=np.concatenate([np.full(pg.n_edges, -1), vnode]),
        seg_a=seg_a,
        seg_b=seg_b,
    )


def _terminal_axis(scenario: Scenario, p, explicit) -> int:
    if explicit is not None:
        return AXES.index(explicit)
    lo, hi = scenario.region.lo, scenario.region.hi
    for ax in range(3):
        if abs(p[ax] - lo[ax]) <= _SNAP or abs(p[ax] - hi[ax]) <= _SNAP:
            return ax
    return 2


def attach_services(g: RoutingGraph, scenario: Scenario, check_connected: bool = True) -> RoutingGraph:
    """Fill in terminals and per-service obstacle clearance masks."""
    pg = g.physical
    g.terminals = {}
    g.allowed = {}
    for s in scenario.services:
        s_ax = _terminal_axis(scenario, s.source, s.source_axis)
        t_ax = _terminal_axis(scenario, s.destination, s.destination_axis)
        try:
            sp, tp = pg.node_at(s.source), pg.node_at(s.destination)
        except KeyError as exc:
            raise ScenarioError(f"service {s.id}: terminal not in graph") from exc
        s_node, t_node = g.virtual_node(sp, s_ax), g.virtual_node(tp, t_ax)
        if s_node == t_node:
            raise ScenarioError(f"service {s.id}: source and destination coincide")
        g.terminals[s.id] = (s_node, t_node)
        mask = np.ones(g.n_edges, bool)
        mask[: pg.n_edges] = pg.obstacle_gap >= s.clearance
        g.allowed[s.id] = mask
        if check_connected and not g.reachable(s.id):
            raise InfeasibleScenarioError(f"service {s.id}: destination unreachable from source")
    return g


def build_routing_graph(
    scenario: Scenario, spacing: float | None = None, check_connected: bool = True
) -> RoutingGraph:
    scenario.validate()
    return attach_services(explode(build_grid(scenario, spacing)), scenario, check_connected)


def arc_distance(g: RoutingGraph, a: int, a2: int) -> float:
    e, e2 = a // 2, a2 // 2
    if e == e2:
        return 0.0
    return segment_distance(g.segment(e), g.segment(e2))
