#@ pe: NumberProducer
#@ kind: Producer
#@ output: output
import random

from laminar import ProducerPE


class NumberProducer(ProducerPE):
    def _process(self):
        # Generate a random number
        result = random.randint(1, 1000)
        # Return the number as the output
        return result
