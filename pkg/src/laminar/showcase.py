"""Ready-made PEs and workflows: IsPrime, word count, and an astronomy-shaped pipeline.

``default_catalog()`` resolves every PE defined here by class name.
``demo_scenario`` fills a registry with 22 PEs and 5 workflows, enough to
exercise text, semantic and code-completion search.
"""

from __future__ import annotations

import math
import random
from collections import defaultdict

from .behaviors import (
    Catalog,
    ConsumerPE,
    GenericPE,
    IterativePE,
    ProducerPE,
    describe,
    grouped,
)
from .dataflow import Grouping, InputPort, WorkflowGraph, linear_pipeline


# ------------------------------------------------------------- IsPrime

class NumberProducer(ProducerPE):
    imports = ("random",)

    def setup(self):
        seed = self.args.get("seed")
        if self.ctx.instance:
            seed = f"{seed}:{self.ctx.instance}"
        self.rng = random.Random(seed)

    def _process(self):
        # Generate a random number
        result = self.rng.randint(1, 1000)
        # Return the number as the output
        return result


class IsPrime(IterativePE):
    def _process(self, num):
        self.print("before checking data - is prime or not")
        # Check if the given input (num) is prime
        if all(num % i != 0 for i in range(2, num)):
            return num


class PrintPrime(ConsumerPE):
    def _process(self, num):
        # Print the input (num)
        self.print(f"the num {num} is prime")


def is_prime_graph() -> WorkflowGraph:
    g = linear_pipeline([describe(NumberProducer), describe(IsPrime), describe(PrintPrime)],
                        name="isPrime")
    g.description = "Workflow that prints random prime numbers"
    return g


# ----------------------------------------------------------- word count

class SentenceProducer(ProducerPE):
    """Streams lines of text, one per iteration, from the ``corpus`` argument."""

    def setup(self):
        self.lines = self.args.get("corpus") or ["the quick brown fox jumps over the lazy dog"]
        self.i = 0

    def _process(self):
        line = self.lines[self.i % len(self.lines)]
        self.i += 1
        return line


class SplitWords(IterativePE):
    def _process(self, line):
        for word in line.split():
            self.write("output", (word, 1))


class CountWords(GenericPE):
    """Stateful word counter; totals are emitted once all input is consumed."""

    inputs = grouped([0])
    outputs = ("output",)
    stateful = True
    imports = ("collections",)

    def setup(self):
        self.count = defaultdict(int)

    def _process(self, inputs):
        word, count = inputs["input"]
        self.count[word] += count

    def finish(self):
        for word, total in self.count.items():
            self.write("output", (word, total, self.ctx.instance))


def word_count_graph() -> WorkflowGraph:
    g = linear_pipeline([describe(SentenceProducer), describe(SplitWords), describe(CountWords)],
                        name="wordCount")
    g.description = "Counts how often each word occurs in a stream of sentences"
    return g


# ------------------------------------------------- internal extinction

class ReadRaDec(ProducerPE):
    """Reads galaxy coordinates (name, ra, dec) from a resources file."""

    def setup(self):
        path = self.resource_path(self.args.get("coordinates", "resources/coordinates.txt"))
        self.rows = []
        for line in path.read_text().splitlines():
            parts = line.split()
            if len(parts) >= 2:
                name = parts[2] if len(parts) > 2 else f"gal{len(self.rows)}"
                self.rows.append((name, float(parts[0]), float(parts[1])))
        self.i = 0

    def _process(self):
        if self.i >= len(self.rows):
            return None
        row = self.rows[self.i]
        self.i += 1
        return row


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


class FilterColumns(IterativePE):
    def _process(self, row):
        # keep only what the extinction model needs
        return (row["name"], row["t"], row["logr25"])


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


def astrophysics_graph() -> WorkflowGraph:
    g = linear_pipeline([describe(ReadRaDec), describe(GetVoTable), describe(FilterColumns),
                         describe(InternalExtinction)], name="Astrophysics")
    g.description = "A workflow to compute the internal extinction of galaxies"
    return g


# ------------------------------------------------------ assorted extras

class SensorReader(ProducerPE):
    """Emits simulated temperature readings."""

    imports = ("random",)

    def setup(self):
        self.rng = random.Random(self.args.get("seed"))

    def _process(self):
        return round(self.rng.gauss(20.0, 3.0), 2)


class MovingAverage(IterativePE):
    """Sliding window mean over the last five readings."""

    stateful = True

    def setup(self):
        self.window = []

    def _process(self, value):
        self.window = (self.window + [value])[-5:]
        return sum(self.window) / len(self.window)


class ThresholdAlert(IterativePE):
    def _process(self, value):
        # raise an alert when the smoothed reading exceeds 25 degrees
        if value > 25.0:
            return ("alert", value)


class AlertLogger(ConsumerPE):
    def _process(self, alert):
        self.print(f"ALERT {alert}")


class LowerCase(IterativePE):
    """Converts text to lower case."""

    def _process(self, text):
        return text.lower()


class StripPunctuation(IterativePE):
    imports = ("string",)

    def _process(self, text):
        import string
        return text.translate(str.maketrans("", "", string.punctuation))


class StopwordFilter(IterativePE):
    """Removes common English stop words from a sentence."""

    STOP = frozenset("a an the and or of to in on is are".split())

    def _process(self, text):
        return " ".join(w for w in text.split() if w not in self.STOP)


class TextSink(ConsumerPE):
    def _process(self, text):
        self.print(text)


class SquareNumber(IterativePE):
    def _process(self, x):
        return x * x


class EvenFilter(IterativePE):
    """Passes through only even integers."""

    def _process(self, x):
        if x % 2 == 0:
            return x


class RangeProducer(ProducerPE):
    """Counts upwards from zero, one integer per iteration."""

    def setup(self):
        self.n = 0

    def _process(self):
        self.n += 1
        return self.n - 1


class Summation(GenericPE):
    inputs = (InputPort("input"),)
    outputs = ("output",)
    stateful = True

    def setup(self):
        self.total = 0

    def _process(self, inputs):
        self.total += inputs["input"]

    def finish(self):
        self.write("output", self.total)


EXTRA_PES = (SensorReader, MovingAverage, ThresholdAlert, AlertLogger, LowerCase,
             StripPunctuation, StopwordFilter, TextSink, SquareNumber, EvenFilter,
             RangeProducer, Summation)

ALL_PES = (NumberProducer, IsPrime, PrintPrime, SentenceProducer, SplitWords, CountWords,
           ReadRaDec, GetVoTable, FilterColumns, InternalExtinction) + EXTRA_PES


def default_catalog() -> Catalog:
    return Catalog({cls.__name__: cls for cls in ALL_PES})


def sensor_graph() -> WorkflowGraph:
    g = linear_pipeline([describe(c) for c in (SensorReader, MovingAverage, ThresholdAlert,
                                               AlertLogger)], name="sensorAlerts")
    g.description = "Smooths sensor readings and logs temperature alerts"
    return g


def text_clean_graph() -> WorkflowGraph:
    g = linear_pipeline([describe(c) for c in (SentenceProducer, LowerCase, StripPunctuation,
                                               StopwordFilter, TextSink)], name="textCleaner")
    g.description = "Normalises sentences and removes stop words"
    return g


# descriptions given at registration; None means "let the registry summarise"
DESCRIPTIONS = {
    "NumberProducer": "Random numbers producer",
    "IsPrime": "Checks if a number is prime and forwards it",
    "PrintPrime": "Prints the prime numbers it receives",
    "SentenceProducer": None,
    "SplitWords": "Splits sentences into (word, 1) pairs",
    "CountWords": None,
    "ReadRaDec": None,
    "GetVoTable": None,
    "FilterColumns": "Selects the catalogue columns used by the extinction model",
    "InternalExtinction": "Computes the internal extinction of a galaxy",
    "SensorReader": None,
    "MovingAverage": None,
    "ThresholdAlert": "Emits an alert when a reading crosses a threshold",
    "AlertLogger": "Logs alerts",
    "LowerCase": None,
    "StripPunctuation": "Removes punctuation characters from text",
    "StopwordFilter": None,
    "TextSink": "Prints text lines",
    "SquareNumber": "Squares integers",
    "EvenFilter": None,
    "RangeProducer": None,
    "Summation": "Adds up all received values and emits the total at the end",
}


def demo_scenario(registry, user: str = "zz46") -> dict:
    """Register 5 workflows and 22 PEs for ``user``; isPrime gets workflow id 2."""
    graphs = [word_count_graph(), is_prime_graph(), astrophysics_graph(),
              sensor_graph(), text_clean_graph()]
    for cls in ALL_PES:
        registry.add_pe(user, describe(cls), DESCRIPTIONS.get(cls.__name__))
    workflows = [registry.add_workflow(user, g, g.name, g.description) for g in graphs]
    return {"workflows": workflows, "pes": registry.pes_of(user)}
