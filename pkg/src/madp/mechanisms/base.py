from dataclasses import dataclass

import numpy as np

from madp.linalg import sensitivity

PATHS = ("direct", "cache_hit", "reconstruct", "synthetic", "refused")
FREE_PATHS = frozenset(PATHS[1:])


@dataclass(frozen=True)
class MechanismAnswer:
    """One released answer on the count scale."""

    value: float
    budget_spent: float
    path: str

    def __post_init__(self):
        if self.path not in PATHS:
            raise ValueError(f"unknown answer path {self.path!r}")
        if self.path in FREE_PATHS and self.budget_spent != 0:
            raise ValueError(f"path {self.path!r} must not spend budget")


REFUSED = MechanismAnswer(float("nan"), 0.0, "refused")


class Mechanism:
    """Online mechanism over a fixed data vector.

    Subclasses answer one query at a time through :meth:`answer` and record
    every privacy charge in ``self.ledger``.
    """

    ledger = None

    def __init__(self, data, noise):
        self.data = data
        self.noise = noise
        self.steps = 0

    def answer(self, q, analyst):
        raise NotImplementedError

    def true_count(self, q):
        return float(np.dot(q, self.data.cells)) * self.data.n

    def laplace(self, q, budget, key):
        """Count-scale Laplace mechanism answer to ``q`` at privacy cost ``budget``."""
        sens = sensitivity(q)
        scale = 0.0 if sens == 0 else sens / budget
        return self.true_count(q) + self.noise.laplace(scale, key)
