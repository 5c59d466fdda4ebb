"""
IsPrime under both mappings
===========================

Three PEs: a producer of random integers, a filter that keeps primes,
and a printer. The same abstract graph is run sequentially and then on
five processes.
"""

from laminar import compile_plan, execute
from laminar.showcase import default_catalog, is_prime_graph

graph = is_prime_graph()
catalog = default_catalog()
for c in graph.connections:
    print(f"{c.src}.{c.src_port} -> {c.dst}.{c.dst_port}")

# %%
# The concrete plan for five processes: the producer is a root and gets
# one instance, the other two PEs share the remaining four.

plan = compile_plan(graph, "MULTI", 5)
print(plan.instances)

# %%
# Sequential run. ``seed`` makes the producer repeatable.

simple = execute(compile_plan(graph, "SIMPLE"), catalog, 10, args={"seed": 36})
print("\n".join(simple.stdout))

# %%
# Parallel run with the same seed. Each instance writes its own stdout, so
# lines may interleave differently, but the primes found are the same.

multi = execute(plan, catalog, 10, args={"seed": 36})
print(sorted(multi.outputs["PrintPrime"]))
assert sorted(multi.outputs["PrintPrime"]) == sorted(simple.outputs["PrintPrime"])
