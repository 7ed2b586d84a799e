"""Named mechanism kinds and a single entry point for running them."""

from dataclasses import dataclass, field, replace

import numpy as np

from madp.mechanisms.base import Mechanism
from madp.mechanisms.laplace import LaplaceSplit
from madp.mechanisms.ledger import BudgetLedger
from madp.mechanisms.noise import KeyedNoise, StreamNoise
from madp.mechanisms.pmw import PMW, PMWParams
from madp.mechanisms.schedulers import scheduler_run
from madp.mechanisms.scr import SeededCacheReconstruct, default_lambda
from madp.workloads import query_limit

MECHANISM_KINDS = (
    "independent_pmw",
    "pmw",
    "scr",
    "round_robin_pmw",
    "randomized_pmw",
    "laplace_split",
    "independent_laplace_split",
)
SCHEDULED = {"round_robin_pmw": "round_robin", "randomized_pmw": "randomized"}

# seed-stream tags; solo streams are shared by standalone runs and wrapper children
JOINT, SOLO, LEAVE_OUT, SCHEDULE = 1, 2, 3, 4


@dataclass
class MechanismParams:
    """Scenario-level settings shared by every run of one mechanism.

    ``lam`` is fixed per scenario (see :func:`resolve_params`) so that joint,
    solo and leave-one-out runs of SCR use the same per-query budget.
    ``laplace_queries=None`` lets split-Laplace declare the number of queries
    its own budget can answer under the threshold.
    """

    gamma: float = 0.25
    basis: str = "hierarchical"
    lam: float | None = None
    pmw: PMWParams = field(default_factory=PMWParams)
    laplace_queries: int | None = None
    noise: str = "stream"


def resolve_params(params, shares, alpha, n):
    if params.lam is not None:
        return params
    shares = np.asarray(shares, dtype=float)
    lam = default_lambda(shares, shares.sum(), alpha * n, params.gamma)
    return replace(params, lam=lam)


class Independent(Mechanism):
    """Routes each analyst to a private single-analyst instance built on demand."""

    def __init__(self, data, shares, make_child):
        super().__init__(data, None)
        self.shares = np.asarray(shares, dtype=float)
        self.make_child = make_child
        self.children = {}
        self.ledger = BudgetLedger(self.shares.sum(), allowances=self.shares)

    def answer(self, q, analyst):
        self.steps += 1
        child = self.children.get(analyst)
        if child is None:
            child = self.children[analyst] = self.make_child(analyst, self.shares[analyst])
        ans = child.answer(q, analyst)
        if ans.budget_spent:
            self.ledger.charge(ans.budget_spent, analyst=analyst, step=self.steps)
        return ans


@dataclass
class RunOutput:
    answers: list
    time_steps: int
    stalls: int
    mechanism: Mechanism
    answered_at: np.ndarray | None = None


def _noise(params, trial_seed, stream):
    if params.noise == "keyed":
        return KeyedNoise(trial_seed)
    if params.noise != "stream":
        raise ValueError(f"unknown noise mode {params.noise!r}")
    return StreamNoise([trial_seed, *stream])


def _base(kind, data, epsilon, shares, alpha, params, noise):
    if kind == "pmw":
        return PMW(data, epsilon, alpha, noise, params.pmw)
    if kind == "laplace_split":
        total = params.laplace_queries or max(1, query_limit(alpha * data.n, epsilon, 1))
        return LaplaceSplit(data, epsilon, total, noise)
    if kind == "scr":
        return SeededCacheReconstruct(data, shares, params.lam, noise, gamma=params.gamma,
                                      basis=params.basis, epsilon=epsilon)
    raise ValueError(f"unknown mechanism kind {kind!r}")


def build_mechanism(kind, data, shares, alpha, params, trial_seed=0, stream=(JOINT,)):
    """Instantiate ``kind`` for the collective whose budgets are ``shares``.

    ``shares`` holds one absolute budget per analyst id (0 for analysts
    outside the collective); the collective's total is their sum.
    """
    shares = np.asarray(shares, dtype=float)
    epsilon = float(shares.sum())
    if kind.startswith("independent_"):
        inner = kind[len("independent_"):]

        def make_child(analyst, budget):
            solo = np.zeros_like(shares)
            solo[analyst] = budget
            noise = _noise(params, trial_seed, (SOLO, analyst))
            return _base(inner, data, budget, solo, alpha, params, noise)

        return Independent(data, shares, make_child)
    inner = "pmw" if kind in SCHEDULED else kind
    return _base(inner, data, epsilon, shares, alpha, params, _noise(params, trial_seed, stream))


def run_sequence(kind, data, seq, shares, alpha, params, trial_seed=0, stream=(JOINT,)):
    """Answer every query of ``seq`` with a fresh instance of ``kind``."""
    if kind not in MECHANISM_KINDS:
        raise ValueError(f"unknown mechanism kind {kind!r}")
    mech = build_mechanism(kind, data, shares, alpha, params, trial_seed, stream)
    if kind in SCHEDULED:
        live = np.asarray(shares, dtype=float) > 0
        weights = live / live.sum()
        answers, state = scheduler_run(
            SCHEDULED[kind], mech, seq, weights, seed=[trial_seed, SCHEDULE, *stream]
        )
        return RunOutput(answers, state.time_steps, state.stall_count, mech, state.answered_at)
    answers = [mech.answer(q, a) for q, a in seq]
    return RunOutput(answers, len(seq), 0, mech)
