#@ pe: IsPrime
#@ kind: Iterative
from laminar import IterativePE


class IsPrime(IterativePE):
    def _process(self, num):
        self.print("before checking data - is prime or not")
        # Check if the given input (num) is prime
        if all(num % i != 0 for i in range(2, num)):
            return num
