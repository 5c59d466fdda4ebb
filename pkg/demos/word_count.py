"""
Group-by word count
===================

``CountWords`` groups its input on element 0 of each ``(word, 1)`` tuple,
so every occurrence of a word reaches the same instance and its count
lives in one place.
"""

import random
from collections import Counter

from laminar import PEDescriptor, compile_plan, execute, linear_pipeline
from laminar.behaviors import ProducerPE, describe
from laminar.showcase import CountWords, default_catalog, word_count_graph

rng = random.Random(0)
vocab = "alpha beta gamma delta epsilon zeta eta theta iota kappa".split()
corpus = [" ".join(rng.choices(vocab, k=8)) for _ in range(200)]

# %%
# Sentence producer -> split -> count, on four processes.

result = execute(compile_plan(word_count_graph(), "MULTI", 4), default_catalog(),
                 len(corpus), args={"corpus": corpus})
totals = {w: c for w, c, _ in result.outputs["CountWords"]}
print(totals)
assert totals == Counter(w for line in corpus for w in line.split())

# %%
# Feeding pairs straight into the counter leaves three of the four
# processes for counting. Each word shows up under exactly one instance.


class Pairs(ProducerPE):
    def setup(self):
        self.words = iter(w for line in self.args["corpus"] for w in line.split())

    def _process(self):
        return (next(self.words), 1)


catalog = default_catalog()
catalog.register("Pairs", Pairs)
graph = linear_pipeline([PEDescriptor.producer("Pairs"), describe(CountWords)])
result = execute(compile_plan(graph, "MULTI", 4), catalog, 1600, args={"corpus": corpus})
by_instance = {}
for word, total, instance in result.outputs["CountWords"]:
    by_instance.setdefault(instance, []).append(word)
for instance, words in sorted(by_instance.items()):
    print(instance, sorted(words))
