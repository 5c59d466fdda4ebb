"""
Searching the registry
======================

Fills an in-memory registry with 22 PEs and 5 workflows, then runs the
three kinds of search. Embeddings come from the built-in hashed
bag-of-words model, so this needs no model service.
"""

from laminar import Registry
from laminar.search import code_completion_search, semantic_search, text_search
from laminar.showcase import demo_scenario

registry = Registry()
registry.register_user("zz46", "password")
demo_scenario(registry, "zz46")

# %%
# Substring search over names and descriptions.

for hit in text_search(registry, "prime", "workflow", "zz46"):
    print(hit.kind, hit.id, hit.name, "-", hit.description)

# %%
# Semantic search ranks PEs by cosine similarity between the query and the
# stored description embeddings.

for hit in semantic_search(registry, "A PE that checks if a number is prime", "zz46")[:5]:
    print(f"{hit.score:.3f}  {hit.name:20s} {hit.description}")

# %%
# Code completion search compares a code fragment with stored code
# embeddings.

for hit in code_completion_search(registry, "random.randint(1, 1000)", "zz46")[:3]:
    print(f"{hit.score:.3f}  {hit.name}")

# %%
# PEs registered without a description were summarised from their source.

for rec in registry.pes_of("zz46"):
    print(f"{rec.pe_id:2d} {rec.pe_name:20s} {rec.description}")
