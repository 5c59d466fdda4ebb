#@ pe: GetVoTable
#@ kind: Iterative
#@ input: input
#@ output: output
import random

from laminar import IterativePE


class GetVoTable(IterativePE):
    """Looks up a catalogue row for a coordinate pair.

    Offline stand-in for a Virtual Observatory query: the row is derived
    deterministically from the coordinates.
    """

    imports = ("random",)

    def _process(self, coords):
        name, ra, dec = coords
        rng = random.Random(f"{ra:.6f},{dec:.6f}")
        return {
            "name": name, "ra": ra, "dec": dec,
            "t": rng.randint(-5, 10),
            "logr25": round(rng.uniform(0.0, 1.0), 3),
            "vmag": round(rng.uniform(10.0, 16.0), 2),
        }
