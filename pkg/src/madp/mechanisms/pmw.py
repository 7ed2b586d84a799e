"""Private Multiplicative Weights over a fractional-count data vector."""

from dataclasses import dataclass, replace

import numpy as np

from madp.linalg import sensitivity
from madp.mechanisms.base import Mechanism, MechanismAnswer
from madp.mechanisms.ledger import COMPOSITION_TOL, BudgetLedger
from madp.mechanisms.noise import query_key


@dataclass
class PMWParams:
    """Knobs for :class:`PMW`; ``None`` means "derive the default".

    ``threshold`` and ``threshold_noise`` are on the fractional scale.
    """

    threshold: float | None = None
    learning_rate: float | None = None
    expected_updates: int | None = None
    update_budget: float | None = None
    threshold_noise: float | None = None


@dataclass
class PMWState:
    synthetic: np.ndarray
    remaining_budget: float
    threshold: float
    update_budget: float
    learning_rate: float
    threshold_noise: float

    @classmethod
    def initial(cls, d, n, epsilon, alpha, params=None):
        params = params or PMWParams()
        updates = params.expected_updates or 2 * d
        update_budget = params.update_budget or epsilon / (2 * updates)
        return cls(
            synthetic=np.full(d, 1.0 / d),
            remaining_budget=float(epsilon),
            threshold=params.threshold if params.threshold is not None else alpha / 2,
            update_budget=update_budget,
            learning_rate=params.learning_rate if params.learning_rate is not None else alpha / 8,
            threshold_noise=(
                params.threshold_noise
                if params.threshold_noise is not None
                else 2.0 / (update_budget * n)
            ),
        )


def pmw_answer(state, q, x, noise):
    """Answer ``q`` against data ``x`` and return ``(answer, new_state)``.

    The answer value is on the count scale.
    """
    q = np.asarray(q, dtype=float)
    synth = float(q @ state.synthetic)
    if state.remaining_budget + COMPOSITION_TOL < state.update_budget:
        return MechanismAnswer(synth * x.n, 0.0, "synthetic"), state
    true = float(q @ x.cells)
    gap = true - synth + noise.laplace(state.threshold_noise, query_key("svt", q))
    if abs(gap) <= state.threshold:
        return MechanismAnswer(synth * x.n, 0.0, "synthetic"), state

    sens = sensitivity(q)
    scale = 0.0 if sens == 0 else sens / state.update_budget
    value = true * x.n + noise.laplace(scale, query_key("pmw", q))
    w = state.synthetic * np.exp(np.sign(gap) * state.learning_rate * q)
    w /= w.sum()
    new = replace(
        state,
        synthetic=w,
        remaining_budget=max(0.0, state.remaining_budget - state.update_budget),
    )
    return MechanismAnswer(value, state.update_budget, "direct"), new


class PMW(Mechanism):
    def __init__(self, data, epsilon, alpha, noise, params=None):
        super().__init__(data, noise)
        self.epsilon = float(epsilon)
        self.state = PMWState.initial(data.d, data.n, epsilon, alpha, params)
        self.ledger = BudgetLedger(self.epsilon)

    def answer(self, q, analyst=0):
        self.steps += 1
        ans, self.state = pmw_answer(self.state, q, self.data, self.noise)
        if ans.budget_spent:
            self.ledger.charge(ans.budget_spent, step=self.steps)
        return ans
