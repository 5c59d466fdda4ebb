#@ pe: InternalExtinction
#@ kind: Iterative
#@ input: input
#@ output: output
import math

from laminar import IterativePE


class InternalExtinction(IterativePE):
    imports = ("math",)

    def _process(self, data):
        name, t, logr25 = data
        if t < 0:
            gamma = 0.0
        elif t <= 9:
            gamma = 0.92 + 0.08 * math.cos(math.pi * t / 9.0)
        else:
            gamma = 0.5
        a_int = round(gamma * logr25 * 1.5, 4)
        self.print(f"{name}: A_int = {a_int}")
        return (name, a_int)
