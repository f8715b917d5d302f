"""Why the clearance and elbow rules matter.

Three services cross a room with a central pillar.  Routed as a plain
multicommodity flow they hug each other and turn wherever it is cheap;
with the technical rules switched on the routes spread out and get longer.
Both layouts are written as OBJ files for a side-by-side look.
"""
import sys
from pathlib import Path

from piperoute import EdgeCostTable, ExactConfig, build_routing_graph, solve_exact, validate
from piperoute.instances import example1_scenario
from piperoute.validation import export_geometry

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
out.mkdir(exist_ok=True)

sc = example1_scenario()
g = build_routing_graph(sc)
costs = EdgeCostTable(g, sc)
print(f"graph: {g.n_nodes} nodes, {g.n_edges} edges, {len(sc.services)} services")

plain = solve_exact(g, costs, sc.services, ExactConfig(dist=False, elbow=False))
full = solve_exact(g, costs, sc.services)

for name, res in (("flow only", plain), ("with rules", full)):
    rep = validate(g, sc, costs, res.solution)
    print(f"\n{name}: objective {res.objective:g} ({res.status}, {res.nodes} nodes, cuts {res.cuts})")
    for k in sorted(res.solution.arcs):
        print(f"  service {k}: {res.solution.n_elbows(g, k)} elbows, corners {res.solution.corners(g, k)}")
    print("  " + rep.summary().replace("\n", "\n  "))
    export_geometry(sc, res.solution, out / f"example1_{name.replace(' ', '_')}.obj", g=g, tubes=True)

print(f"\nOBJ files in {out}/")
