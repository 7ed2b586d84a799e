"""Seeded Cache and Reconstruct."""

import numpy as np

from madp.linalg import LeastSquaresCache
from madp.mechanisms.base import Mechanism, MechanismAnswer
from madp.mechanisms.ledger import COMPOSITION_TOL, BudgetLedger
from madp.mechanisms.noise import query_key
from madp.workloads import query_limit, tree_intervals

CACHE_MATCH_TOL = 1e-12


def basis_matrix(kind, d):
    if isinstance(kind, np.ndarray):
        return np.atleast_2d(kind).astype(float)
    if kind == "identity":
        return np.eye(d)
    if kind == "hierarchical":
        rows = np.zeros((2 * d - 1, d))
        for r, (a, b) in enumerate(tree_intervals(0, d)):
            rows[r, a:b] = 1.0
        return rows
    raise ValueError(f"unknown basis {kind!r}")


def default_lambda(shares, epsilon, alpha_count, gamma, k=None):
    """Per-query budget that lets the smallest share answer ``query_limit`` queries.

    ``alpha_count`` is the error threshold on the count scale.
    """
    k = k or len(shares)
    target = max(1, query_limit(alpha_count, epsilon, k))
    return (1 - gamma) * min(shares) / target


class SeededCacheReconstruct(Mechanism):
    """Online multi-analyst mechanism with per-analyst budgets and a shared cache.

    Phase 1 spends ``gamma * epsilon`` answering every basis row (split evenly
    across rows). Afterwards analyst ``i`` holds ``(1 - gamma) * shares[i]``.
    While that covers ``lam`` a query is served from the cache if present and
    otherwise answered with Laplace at budget ``lam`` and cached; once it does
    not, the query is reconstructed by least squares from the whole cache.

    ``shares`` has one entry per analyst id; absent analysts carry 0.
    """

    def __init__(self, data, shares, lam, noise, gamma=0.25, basis="hierarchical",
                 epsilon=None):
        super().__init__(data, noise)
        shares = np.asarray(shares, dtype=float)
        if epsilon is None:
            epsilon = float(shares.sum())
        if shares.sum() > epsilon + 1e-9:
            raise ValueError("shares exceed the total budget")
        if not 0 < gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")
        self.epsilon = float(epsilon)
        self.gamma = float(gamma)
        self.lam = float(lam)
        self.ledger = BudgetLedger(self.epsilon, allowances=(1 - gamma) * shares)
        self.history = []

        d = data.d
        rows = basis_matrix(basis, d)
        cap = rows.shape[0] + 64
        self._rows = np.zeros((cap, d))
        self._answers = np.zeros(cap)
        self._budgets = np.zeros(cap)
        # fixed projection used to prefilter cache lookups; any row within
        # CACHE_MATCH_TOL of q projects within CACHE_MATCH_TOL * |probe|_1
        self._probe = np.random.default_rng(d).uniform(1.0, 2.0, size=d)
        self._proj = np.zeros(cap)
        self._size = 0
        self.ls = LeastSquaresCache(d)

        seed_budget = self.gamma * self.epsilon
        per_row = seed_budget / rows.shape[0]
        answers = np.array([self.laplace(r, per_row, query_key("seed", r)) for r in rows])
        self.ledger.charge(seed_budget, step=0)
        self._append(rows, answers, np.full(rows.shape[0], per_row))
        self.ls.add_many(rows, self._budgets[: self._size], answers)

    @property
    def cache_rows(self):
        return self._rows[: self._size]

    @property
    def cache_answers(self):
        return self._answers[: self._size]

    @property
    def cache_budgets(self):
        return self._budgets[: self._size]

    def _append(self, rows, answers, budgets):
        m = rows.shape[0]
        if self._size + m > self._rows.shape[0]:
            cap = max(2 * self._rows.shape[0], self._size + m)
            for name in ("_rows", "_answers", "_budgets", "_proj"):
                old = getattr(self, name)
                new = np.zeros((cap,) + old.shape[1:])
                new[: self._size] = old[: self._size]
                setattr(self, name, new)
        self._rows[self._size : self._size + m] = rows
        self._answers[self._size : self._size + m] = answers
        self._budgets[self._size : self._size + m] = budgets
        self._proj[self._size : self._size + m] = rows @ self._probe
        self._size += m

    def lookup(self, q):
        slack = CACHE_MATCH_TOL * self._probe.sum() * (1 + 1e-9)
        near = np.flatnonzero(np.abs(self._proj[: self._size] - q @ self._probe) <= slack + 1e-15)
        for idx in near:
            if np.abs(self._rows[idx] - q).max() <= CACHE_MATCH_TOL:
                return int(idx)
        return None

    def answer(self, q, analyst):
        self.steps += 1
        q = np.asarray(q, dtype=float)
        remaining = float(self.ledger.per_analyst_remaining[analyst])
        self.history.append((analyst, remaining))
        if self.lam > 0 and remaining + COMPOSITION_TOL >= self.lam:
            idx = self.lookup(q)
            if idx is not None:
                return MechanismAnswer(float(self._answers[idx]), 0.0, "cache_hit")
            value = self.laplace(q, self.lam, query_key("scr", q))
            self.ledger.charge(self.lam, analyst=analyst, step=self.steps)
            self._append(q[None, :], np.array([value]), np.array([self.lam]))
            self.ls.add(q, self.lam, value)
            return MechanismAnswer(value, self.lam, "direct")
        return MechanismAnswer(self.ls.answer(q), 0.0, "reconstruct")

    def remaining_before(self, analyst):
        """Remaining budget seen by ``analyst`` before each of its queries."""
        return [r for a, r in self.history if a == analyst]
