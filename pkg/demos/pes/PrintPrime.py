#@ pe: PrintPrime
#@ kind: Consumer
from laminar import ConsumerPE


class PrintPrime(ConsumerPE):
    def _process(self, num):
        # Print the input (num)
        self.print(f"the num {num} is prime")
