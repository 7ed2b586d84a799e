import numpy as np

from madp.mechanisms.base import REFUSED, Mechanism, MechanismAnswer
from madp.mechanisms.ledger import BudgetLedger
from madp.mechanisms.noise import query_key


class LaplaceSplit(Mechanism):
    """Laplace mechanism with the budget split evenly over a declared query count.

    Each of the first ``total_queries`` queries is answered with budget
    ``epsilon / total_queries``; later queries are refused.
    """

    def __init__(self, data, epsilon, total_queries, noise):
        super().__init__(data, noise)
        if total_queries < 1:
            raise ValueError("total_queries must be at least 1")
        self.epsilon = float(epsilon)
        self.total_queries = int(total_queries)
        self.per_query = self.epsilon / self.total_queries
        self.ledger = BudgetLedger(self.epsilon)
        self.answered = 0

    def answer(self, q, analyst=0):
        self.steps += 1
        if self.answered >= self.total_queries:
            return REFUSED
        q = np.asarray(q, dtype=float)
        value = self.laplace(q, self.per_query, query_key("lap", q))
        self.ledger.charge(self.per_query, step=self.steps)
        self.answered += 1
        return MechanismAnswer(value, self.per_query, "direct")


def laplace_uniform_split(data, total_queries, epsilon, noise):
    return LaplaceSplit(data, epsilon, total_queries, noise)
