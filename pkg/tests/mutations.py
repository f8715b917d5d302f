"""Systematic corruptions of valid solutions, each tagged with the check it must trip."""
import numpy as np

from piperoute.paths import shortest_path
from piperoute.solution import Solution


def _copy(sol, k, arcs):
    out = {kk: list(v) for kk, v in sol.arcs.items()}
    if arcs is None:
        del out[k]
    else:
        out[k] = list(arcs)
    return Solution(out, objective=sol.objective)


def _simple(nodes):
    return len(set(nodes)) == len(nodes)


def collisions(g, sol, k, per_pair=2):
    """Reroute ``k`` through interior nodes of another service's path."""
    s, t = g.terminals[k]
    w = np.where(g.allowed[k], 1.0, np.inf)
    for k2 in sorted(sol.arcs):
        if k2 == k:
            continue
        nodes2 = sol.nodes(g, k2)
        found = 0
        for v in nodes2[2:-2]:
            _, a = shortest_path(g, w, s, v)
            _, b = shortest_path(g, w, v, t)
            if a is None or b is None:
                continue
            nodes = a + b[1:]
            if _simple(nodes):
                yield f"collide {k}->{k2}@{v}", _copy(sol, k, g.nodes_to_arcs(nodes))
                found += 1
                if found == per_pair:
                    break


def _jog(g, nodes, i, on_path):
    """Nodes with step ``i-1 -> i`` replaced by a detour, or None."""
    pg = g.physical
    u, v = nodes[i - 1], nodes[i]
    ax = v % 3
    for b in (x for x in range(3) if x != ax):
        for sign in (1, -1):
            off = np.zeros(3)
            off[b] = sign * pg.spacing[b]
            try:
                qu = pg.node_at(pg.coords[u // 3] + off)
                qv = pg.node_at(pg.coords[v // 3] + off)
            except KeyError:
                continue
            if qu in on_path or qv in on_path:
                continue
            detour = [3 * (u // 3) + b, 3 * qu + b, 3 * qu + ax, 3 * qv + ax, 3 * qv + b, 3 * (v // 3) + b]
            new = nodes[:i] + detour + nodes[i:]
            if not _simple(new):
                continue
            try:
                return g.nodes_to_arcs(new)
            except KeyError:
                continue
    return None


def elbow_jogs(g, sol, k, per_service=3):
    """Replace straight steps by one-spacing U-shaped detours."""
    nodes = sol.nodes(g, k)
    on_path = {v // 3 for v in nodes}
    found = 0
    for i in range(1, len(nodes) - 1):
        u, v, w = nodes[i - 1], nodes[i], nodes[i + 1]
        if not (u // 3 != v // 3 != w // 3 and u % 3 == v % 3 == w % 3):
            continue
        arcs = _jog(g, nodes, i, on_path)
        if arcs is not None:
            yield f"jog {k}@{i}", _copy(sol, k, arcs)
            found += 1
            if found == per_service:
                return


def broken_flows(g, sol, k):
    arcs = list(sol.arcs[k])
    m = len(arcs) // 2
    yield f"drop {k}@{m}", _copy(sol, k, arcs[:m] + arcs[m + 1:])
    yield f"drop-first {k}", _copy(sol, k, arcs[1:])
    yield f"drop-last {k}", _copy(sol, k, arcs[:-1])
    yield f"flip {k}@{m}", _copy(sol, k, arcs[:m] + [arcs[m] ^ 1] + arcs[m + 1:])
    yield f"repeat {k}", _copy(sol, k, arcs + [arcs[-1] ^ 1, arcs[-1]])
    yield f"missing {k}", _copy(sol, k, None)


KINDS = {"dist": collisions, "elbow": elbow_jogs, "path": broken_flows}


def mutate(g, sol, limit_per_kind=None):
    """``(label, expected check, Solution)`` for every mutation of ``sol``."""
    out = []
    for check, fn in KINDS.items():
        got = []
        for k in sorted(sol.arcs):
            got.extend((label, check, m) for label, m in fn(g, sol, k))
        out.extend(got[:limit_per_kind] if limit_per_kind else got)
    return out
