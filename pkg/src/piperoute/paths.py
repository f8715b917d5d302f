"""Single-pair shortest paths over the exploded graph."""
from __future__ import annotations

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .graph import RoutingGraph


def edge_weights(costs, k: int, allowed=None, forbidden_edges=None) -> np.ndarray:
    """Edge weights for service ``k`` with disallowed edges set to ``inf``."""
    w = np.array(costs, dtype=float, copy=True)
    if allowed is not None:
        w[~allowed] = np.inf
    if forbidden_edges is not None and len(forbidden_edges):
        w[np.asarray(list(forbidden_edges), dtype=int)] = np.inf
    return w


def forbid_nodes(g: RoutingGraph, w: np.ndarray, nodes) -> None:
    for v in nodes:
        w[g.incident_edges(int(v))] = np.inf


def shortest_path(g: RoutingGraph, w: np.ndarray, source: int, target: int):
    """Return ``(cost, node list)``; ``(inf, None)`` if unreachable."""
    return shortest_path_arcs(g, np.repeat(w, 2), source, target)


def shortest_path_arcs(g: RoutingGraph, arc_w: np.ndarray, source: int, target: int):
    m = g.csr_matrix(arc_w)
    dist, pred = dijkstra(m, directed=True, indices=source, return_predecessors=True)
    if not np.isfinite(dist[target]):
        return np.inf, None
    path = [target]
    while path[-1] != source:
        path.append(int(pred[path[-1]]))
    path.reverse()
    return float(dist[target]), path


class RunLayers:
    """Shortest paths that respect a minimum straight run between elbows.

    Between two consecutive elbows a path is a straight run along one axis,
    so the spacing rule only needs the run length since the last elbow and
    its direction (a run cannot reverse).  Layer 0 is "just turned", then
    one layer per (run length <= limit, direction), and a last layer for
    runs longer than ``limit`` or before the first elbow.  Arc parity gives
    the direction because node ids increase along every axis.
    """

    def __init__(self, g: RoutingGraph, limit: float, max_layers: int = 512):
        self.g, self.limit = g, float(limit)
        phys = ~g.is_virtual
        lengths = np.unique(np.round(g.edge_length[phys], 9))
        runs, frontier = {0.0}, [0.0]
        while frontier:
            r = frontier.pop()
            for L in lengths:
                r2 = round(r + float(L), 9)
                if r2 <= self.limit and r2 not in runs:
                    runs.add(r2)
                    frontier.append(r2)
                    if 2 * len(runs) > max_layers:
                        raise ValueError("too many distinct run lengths below the elbow limit")
        self.runs = np.array(sorted(runs))
        nr = len(self.runs)
        # layers: 0 just turned, 2i-1+d run i in direction d, then long run
        # in direction d, then the start state (no direction, no elbow yet)
        long_ = 2 * nr - 1
        self.start_layer = long_ + 2
        self.n_layers = long_ + 3
        n = g.n_nodes
        arcs = np.arange(g.n_arcs)
        tails, heads = g.arc_tail(arcs), g.arc_head(arcs)
        virt = g.is_virtual[arcs // 2]
        pa = arcs[~virt]
        d = pa % 2
        length = np.round(g.edge_length[pa // 2], 9)
        et, eh, ea = [], [], []

        def add(src_layer, dst_layer, sel):
            et.append(src_layer * n + tails[pa[sel]])
            eh.append(dst_layer[sel] * n + heads[pa[sel]])
            ea.append(pa[sel])

        everything = np.ones(len(pa), bool)
        for i, r in enumerate(self.runs):
            r2 = np.round(r + length, 9)
            j = np.searchsorted(self.runs, np.minimum(r2, self.runs[-1]))
            dst = np.where(r2 <= self.limit, 2 * j - 1 + d, long_ + d)
            if i == 0:
                add(0, dst, everything)
            else:
                for dd in (0, 1):
                    add(2 * i - 1 + dd, dst, d == dd)
        for dd in (0, 1):
            add(long_ + dd, long_ + d, d == dd)
        add(self.start_layer, long_ + d, everything)
        va = arcs[virt]
        for src_layer in (long_, long_ + 1, self.start_layer):
            et.append(src_layer * n + tails[va]); eh.append(heads[va]); ea.append(va)
        et, eh, ea = np.concatenate(et), np.concatenate(eh), np.concatenate(ea)
        order = np.lexsort((eh, et))
        self.heads, self.arcs = eh[order], ea[order]
        self.indptr = np.searchsorted(et[order], np.arange(self.n_layers * n + 1))

    def shortest_path(self, arc_w: np.ndarray, source: int, target: int):
        """``(cost, node list)`` over the original nodes; ``(inf, None)`` if none."""
        n = self.g.n_nodes
        size = self.n_layers * n
        m = csr_matrix((arc_w[self.arcs], self.heads, self.indptr), shape=(size, size))
        start = self.start_layer * n + source
        dist, pred = dijkstra(m, directed=True, indices=start, return_predecessors=True)
        ends = np.arange(self.n_layers) * n + target
        j = int(ends[np.argmin(dist[ends])])
        if not np.isfinite(dist[j]):
            return np.inf, None
        path = [j]
        while path[-1] != start:
            path.append(int(pred[path[-1]]))
        path.reverse()
        return float(dist[j]), [v % n for v in path]


def run_layers(g: RoutingGraph, limit: float) -> RunLayers:
    cache = g.__dict__.setdefault("_run_layers", {})
    key = round(float(limit), 9)
    if key not in cache:
        cache[key] = RunLayers(g, limit)
    return cache[key]


def elbow_shortest_path(g: RoutingGraph, arc_w: np.ndarray, source: int, target: int, limit: float):
    """Cheapest walk whose consecutive elbows are more than ``limit`` apart."""
    return run_layers(g, limit).shortest_path(arc_w, source, target)
