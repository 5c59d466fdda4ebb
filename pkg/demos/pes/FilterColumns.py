#@ pe: FilterColumns
#@ kind: Iterative
#@ input: input
#@ output: output
from laminar import IterativePE


class FilterColumns(IterativePE):
    def _process(self, row):
        # keep only what the extinction model needs
        return (row["name"], row["t"], row["logr25"])
