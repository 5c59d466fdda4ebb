#@ pe: CountWords
#@ kind: Generic
#@ input: input groupby=0
#@ output: output
#@ stateful: true
from collections import defaultdict

from laminar import GenericPE


class CountWords(GenericPE):
    # Stateful word counter, words are routed by the first tuple element
    def setup(self):
        self.count = defaultdict(int)

    def _process(self, inputs):
        word, count = inputs["input"]
        self.count[word] += count

    def finish(self):
        for word, total in self.count.items():
            self.write("output", (word, total, self.ctx.instance))
