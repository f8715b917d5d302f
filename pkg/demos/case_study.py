"""Ten services through a bulkhead cabin.

The cabin is crossed by five partial walls with holes in them.  The grid
has about 100k nodes, which is out of reach for the exact engine, so H2
routes it.  Expect one to two minutes.
"""
import sys
import time
from pathlib import Path

from piperoute import EdgeCostTable, H2Config, build_routing_graph, run_h2, validate
from piperoute.instances import data_path, load_run_config, load_scenario, save_solution
from piperoute.validation import export_geometry

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
out.mkdir(exist_ok=True)

path = data_path("case_study.json")
sc = load_scenario(path)
h2 = load_run_config(path)["h2"]

t = time.perf_counter()
g = build_routing_graph(sc)
costs = EdgeCostTable(g, sc)
print(f"lattice {g.physical.lattice_shape}, {g.n_nodes} nodes ({time.perf_counter() - t:.1f}s)")

sol = run_h2(g, costs, sc.services, H2Config(maxit=h2["maxit"], schedule=tuple(h2["schedule"])), scenario=sc)
print(f"H2 done in {time.perf_counter() - t:.0f}s: objective {sol.objective:,.0f}")
print("  repair moves", sol.meta.get("repair_moves"), "polish moves", sol.meta.get("polish_moves"))
for name, v in sorted(sol.breakdown.items()):
    print(f"  {name:13s} {v:14,.0f}")

print(validate(g, sc, costs, sol).summary())
save_solution(sol, out / "case_study_solution.json", g, costs)
export_geometry(sc, sol, out / "case_study.obj", g=g, tubes=True)
print(f"solution and OBJ in {out}/")
