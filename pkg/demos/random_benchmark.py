"""A small benchmark table over random cube instances.

Every instance is solved exactly and by both matheuristics.  GAP columns
are relative to the exact objective (or the exact lower bound when the
node budget runs out), in percent.  A node budget instead of a time limit
keeps the table identical between runs.
"""
from piperoute.instances import RandomInstanceSpec
from piperoute.validation import BenchmarkLimits, benchmark

specs = [
    RandomInstanceSpec(d=d, s=s, o=o, g=i, seed=i)
    for d in (9, 17)
    for s in (2, 4)
    for o in (0, 5)
    for i in range(2)
]
print(benchmark(specs, limits=BenchmarkLimits(time_limit=120, node_limit=20000)))
