import numpy as np

# Slack allowed on the composed total, for floating-point accumulation.
COMPOSITION_TOL = 1e-12


class BudgetExceeded(RuntimeError):
    pass


class BudgetLedger:
    """Sequential-composition ledger for one mechanism instance.

    ``total`` bounds the sum of all charges. With ``allowances`` the ledger
    also tracks a remaining budget per analyst and refuses charges that would
    drive it negative.
    """

    def __init__(self, total, allowances=None):
        if total < 0:
            raise ValueError("total budget must be non-negative")
        self.total = float(total)
        self.spent = 0.0
        self._carry = 0.0
        self.spent_log = []
        self.per_analyst_remaining = (
            None if allowances is None else np.array(allowances, dtype=float)
        )

    @property
    def remaining(self):
        return max(0.0, self.total - self.spent)

    def can_afford(self, amount, analyst=None):
        if self.spent + amount > self.total + COMPOSITION_TOL:
            return False
        if analyst is not None and self.per_analyst_remaining is not None:
            return self.per_analyst_remaining[analyst] + COMPOSITION_TOL >= amount
        return True

    def charge(self, amount, analyst=None, step=None):
        if amount < 0:
            raise ValueError("cannot charge a negative amount")
        if not self.can_afford(amount, analyst):
            raise BudgetExceeded(
                f"charge of {amount} (analyst {analyst}) exceeds the remaining budget"
            )
        # compensated sum: long runs of tiny charges must not drift past the slack
        t = self.spent + amount
        if abs(self.spent) >= abs(amount):
            self._carry += (self.spent - t) + amount
        else:
            self._carry += (amount - t) + self.spent
        self.spent = t + self._carry
        self._carry -= self.spent - t
        if analyst is not None and self.per_analyst_remaining is not None:
            left = self.per_analyst_remaining[analyst] - amount
            self.per_analyst_remaining[analyst] = max(0.0, left)
        self.spent_log.append((step, analyst, float(amount)))
