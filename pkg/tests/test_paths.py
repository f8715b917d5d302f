import math

import numpy as np
import pytest
from scipy.sparse.csgraph import dijkstra

from conftest import open_box, svc
from piperoute.graph import build_routing_graph
from piperoute.paths import RunLayers, edge_weights, elbow_shortest_path, forbid_nodes, shortest_path


def _brute(g, w, s, t, limit):
    """Cheapest simple path whose consecutive elbows are more than ``limit`` apart."""
    adj = [[] for _ in range(g.n_nodes)]
    for e in np.flatnonzero(np.isfinite(w)):
        u, v = int(g.edge_u[e]), int(g.edge_v[e])
        adj[u].append((v, e))
        adj[v].append((u, e))
    h = dijkstra(g.csr_matrix(np.repeat(w, 2)), directed=True, indices=t)  # symmetric weights
    coords = g.node_coords
    best = [math.inf]

    def dfs(v, cost, seen, last_elbow):
        if cost + h[v] >= best[0] - 1e-12:
            return
        if v == t:
            best[0] = cost
            return
        for u, e in adj[v]:
            if u in seen:
                continue
            le = last_elbow
            if g.is_virtual[e]:
                p = coords[v]
                if le is not None and np.linalg.norm(p - le) <= limit:
                    continue
                le = p
            seen.add(u)
            dfs(u, cost + w[e], seen, le)
            seen.discard(u)

    dfs(s, 0.0, {s}, None)
    return best[0]


def _elbow_points(g, nodes):
    out = []
    for a, b in zip(nodes[:-1], nodes[1:]):
        if a // 3 == b // 3:
            out.append(g.node_coords[a])
    return out


@pytest.mark.parametrize("seed", range(8))
def test_run_layers_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    sc = open_box((4, 3, 2), [svc(0, (0, 0, 0), (3, 2, 1))])
    g = build_routing_graph(sc)
    w = rng.uniform(0.5, 3.0, g.n_edges)
    s, t = g.terminals[0]
    for limit in (0.0, 1.0, 1.5, 2.0):
        got, nodes = elbow_shortest_path(g, np.repeat(w, 2), s, t, limit)
        want = _brute(g, w, s, t, limit)
        assert got == pytest.approx(want), limit
        if nodes is not None:
            pts = _elbow_points(g, nodes)
            assert all(np.linalg.norm(p - q) > limit for p, q in zip(pts[:-1], pts[1:]))
            assert sum(w[g.arc_between(a, b) // 2] for a, b in zip(nodes[:-1], nodes[1:])) == pytest.approx(got)


def test_non_uniform_spacing_runs():
    # an off-lattice terminal creates half-length edges
    sc = open_box((4, 3, 2), [svc(0, (0, 0.5, 0), (3, 2, 1))])
    g = build_routing_graph(sc)
    layers = RunLayers(g, 1.0)
    assert list(layers.runs) == [0.0, 0.5, 1.0]
    w = np.random.default_rng(3).uniform(0.5, 3.0, g.n_edges)
    s, t = g.terminals[0]
    got, _ = layers.shortest_path(np.repeat(w, 2), s, t)
    assert got == pytest.approx(_brute(g, w, s, t, 1.0))


def test_unreachable_and_forbidden_nodes():
    sc = open_box((3, 2, 2), [svc(0, (0, 0, 0), (2, 1, 1))])
    g = build_routing_graph(sc)
    s, t = g.terminals[0]
    w = edge_weights(np.ones(g.n_edges), 0)
    forbid_nodes(g, w, [t])
    assert shortest_path(g, w, s, t) == (math.inf, None)
    assert elbow_shortest_path(g, np.repeat(w, 2), s, t, 0.0)[1] is None


def test_edge_weights_masks():
    w = edge_weights(np.arange(5.0), 0, allowed=np.array([1, 1, 0, 1, 1], bool), forbidden_edges=[4])
    assert list(w) == [0, 1, math.inf, 3, math.inf]
