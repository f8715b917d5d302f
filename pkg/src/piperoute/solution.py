from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import RoutingGraph


@dataclass
class Solution:
    """One arc path per service (keyed by service id)."""

    arcs: dict = field(default_factory=dict)
    objective: float = 0.0
    status: str = "Feasible"
    breakdown: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_node_paths(cls, g: RoutingGraph, paths: dict, **kw) -> "Solution":
        return cls(arcs={k: g.nodes_to_arcs(p) for k, p in paths.items()}, **kw)

    def nodes(self, g: RoutingGraph, k: int) -> list:
        return g.arcs_to_nodes(self.arcs[k])

    def polyline(self, g: RoutingGraph, k: int) -> list:
        """Physical points along the path with elbow duplicates removed."""
        pts = []
        for v in self.nodes(g, k):
            p = tuple(float(c) for c in g.node_coords[v])
            if not pts or pts[-1] != p:
                pts.append(p)
        return pts

    def corners(self, g: RoutingGraph, k: int) -> list:
        """Polyline reduced to its end points and elbows."""
        pts = self.polyline(g, k)
        if len(pts) < 3:
            return pts
        out = [pts[0]]
        for a, b, c in zip(pts[:-2], pts[1:-1], pts[2:]):
            u = np.subtract(b, a)
            w = np.subtract(c, b)
            if np.linalg.norm(np.cross(u, w)) > 1e-12:
                out.append(b)
        out.append(pts[-1])
        return out

    def n_elbows(self, g: RoutingGraph, k: int) -> int:
        return int(np.count_nonzero(g.arc_is_virtual(self.arcs[k]))) if self.arcs[k] else 0
