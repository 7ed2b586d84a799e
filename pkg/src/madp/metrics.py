"""Utility, fairness measures and the joint / solo / leave-one-out protocol."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from madp.mechanisms.schedulers import SchedulerState
from madp.mechanisms.zoo import (
    JOINT,
    LEAVE_OUT,
    SOLO,
    MechanismParams,
    resolve_params,
    run_sequence,
)
from madp.workloads import ScenarioConfig, build_trial

INF = float("inf")


@dataclass(frozen=True)
class TraceRecord:
    step: int
    analyst: int
    true_answer: float
    released_answer: float
    path: str
    budget_spent: float


@dataclass
class Trace:
    """Column-wise trace of one run; answers are on the fractional scale."""

    step: np.ndarray
    analyst: np.ndarray
    true_answer: np.ndarray
    released_answer: np.ndarray
    path: np.ndarray
    budget_spent: np.ndarray

    @classmethod
    def from_records(cls, records):
        cols = list(zip(*[(r.step, r.analyst, r.true_answer, r.released_answer, r.path,
                           r.budget_spent) for r in records])) or [()] * 6
        return cls(np.asarray(cols[0], dtype=int), np.asarray(cols[1], dtype=int),
                   np.asarray(cols[2], dtype=float), np.asarray(cols[3], dtype=float),
                   np.asarray(cols[4], dtype=object), np.asarray(cols[5], dtype=float))

    @classmethod
    def from_run(cls, seq, data, run):
        """Trace of ``run`` (a :class:`RunOutput`) ordered by answer time."""
        true = seq.queries @ data.cells
        released = np.array([a.value for a in run.answers], dtype=float) / data.n
        steps = getattr(run, "answered_at", None)
        if steps is None:
            steps = np.arange(1, len(seq) + 1)
        order = np.argsort(steps, kind="stable")
        return cls(
            step=np.asarray(steps)[order],
            analyst=seq.analysts[order],
            true_answer=true[order],
            released_answer=released[order],
            path=np.array([run.answers[t].path for t in order], dtype=object),
            budget_spent=np.array([run.answers[t].budget_spent for t in order]),
        )

    def __len__(self):
        return self.step.size

    def records(self):
        return [TraceRecord(int(s), int(a), float(t), float(r), str(p), float(b))
                for s, a, t, r, p, b in zip(self.step, self.analyst, self.true_answer,
                                            self.released_answer, self.path, self.budget_spent)]


def _as_trace(trace):
    return trace if isinstance(trace, Trace) else Trace.from_records(list(trace))


@dataclass
class UtilityReport:
    per_analyst_utility: np.ndarray
    total_utility: int
    alpha: float


def utility(trace, alpha, k=None):
    """Count, per analyst, the answers with absolute error below ``alpha``."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    tr = _as_trace(trace)
    if k is None:
        k = int(tr.analyst.max()) + 1 if len(tr) else 0
    with np.errstate(invalid="ignore"):
        ok = np.abs(tr.released_answer - tr.true_answer) < alpha
    per = np.bincount(tr.analyst[ok], minlength=k).astype(int)
    return UtilityReport(per, int(per.sum()), alpha)


def ratio(num, den):
    """``num / den`` with 0/0 -> 1 and x/0 -> inf."""
    if den == 0:
        return 1.0 if num == 0 else INF
    return num / den


def max_ratio_error(independent_utils, joint_utils):
    ind = np.asarray(independent_utils, dtype=float)
    joint = np.asarray(joint_utils, dtype=float)
    if ind.shape != joint.shape:
        raise ValueError("utility vectors differ in length")
    return max((ratio(a, b) for a, b in zip(ind, joint)), default=1.0)


def interference_by_analyst(full_utils, leave_one_out_utils):
    """For each analyst ``i``, ``max_{j != i} loo[j, i] / full[i]`` (1.0 when k=1)."""
    full = np.asarray(full_utils, dtype=float)
    loo = np.asarray(leave_one_out_utils, dtype=float)
    k = full.size
    out = np.ones(k)
    for i in range(k):
        vals = [ratio(loo[j, i], full[i]) for j in range(k) if j != i]
        if vals:
            out[i] = max(vals)
    return out


def empirical_interference(full_utils, leave_one_out_utils):
    """Largest leave-one-out over full-collective utility ratio across ordered pairs."""
    return float(max(interference_by_analyst(full_utils, leave_one_out_utils), default=1.0))


def time_to_completion(run):
    """Time steps to answer everything: scheduler steps incl. stalls, else ``|Q|``."""
    if isinstance(run, SchedulerState):
        return run.time_steps
    if hasattr(run, "time_steps"):
        return int(run.time_steps)
    return len(run)


# -- scenario protocol ---------------------------------------------------------


@dataclass
class TrialResult:
    trial: int
    joint: np.ndarray
    solo: np.ndarray
    leave_out: np.ndarray | None
    time_steps: int
    stalls: int
    n_queries: int
    spent: float


@dataclass
class ScenarioReport:
    config: ScenarioConfig
    mechanism: str
    trials: list = field(default_factory=list)

    @property
    def mean_joint(self):
        return np.mean([t.joint for t in self.trials], axis=0)

    @property
    def mean_solo(self):
        return np.mean([t.solo for t in self.trials], axis=0)

    @property
    def mean_leave_out(self):
        if any(t.leave_out is None for t in self.trials):
            return None
        return np.mean([t.leave_out for t in self.trials], axis=0)

    @property
    def max_ratio_error(self):
        return max_ratio_error(self.mean_solo, self.mean_joint)

    @property
    def empirical_interference(self):
        loo = self.mean_leave_out
        return None if loo is None else empirical_interference(self.mean_joint, loo)

    @property
    def mean_time_steps(self):
        return float(np.mean([t.time_steps for t in self.trials]))

    @property
    def mean_queries(self):
        return float(np.mean([t.n_queries for t in self.trials]))

    def rows(self):
        """Per-trial and aggregate rows in the CSV column order."""
        cfg = self.config
        head = dict(mechanism=self.mechanism, p=cfg.p, epsilon=cfg.epsilon, alpha=cfg.alpha)
        out = []
        for t in self.trials:
            inter = (interference_by_analyst(t.joint, t.leave_out)
                     if t.leave_out is not None else [None] * cfg.k)
            for i in range(cfg.k):
                out.append(dict(trial=t.trial, **head, analyst=i,
                                utility_joint=int(t.joint[i]),
                                utility_independent=int(t.solo[i]),
                                ratio=ratio(t.solo[i], t.joint[i]),
                                interference=inter[i],
                                time_steps=t.time_steps, stalls=t.stalls))
        joint, solo, loo = self.mean_joint, self.mean_solo, self.mean_leave_out
        inter = interference_by_analyst(joint, loo) if loo is not None else [None] * cfg.k
        stalls = float(np.mean([t.stalls for t in self.trials]))
        for i in range(cfg.k):
            out.append(dict(trial="mean", **head, analyst=i, utility_joint=joint[i],
                            utility_independent=solo[i], ratio=ratio(solo[i], joint[i]),
                            interference=inter[i], time_steps=self.mean_time_steps,
                            stalls=stalls))
        out.append(dict(trial="mean", **head, analyst="all", utility_joint=joint.sum(),
                        utility_independent=solo.sum(), ratio=self.max_ratio_error,
                        interference=self.empirical_interference,
                        time_steps=self.mean_time_steps, stalls=stalls))
        return out


def _utilities(kind, data, seq, shares, alpha, k, params, trial_seed, stream):
    run = run_sequence(kind, data, seq, shares, alpha, params, trial_seed, stream)
    trace = Trace.from_run(seq, data, run)
    return utility(trace, alpha, k).per_analyst_utility, run


def evaluate_trial(kind, data, seq, shares, alpha, params, trial, trial_seed, leave_out=True):
    """Joint run, one solo run per analyst and optional leave-one-out runs on ``seq``."""
    shares = np.asarray(shares, dtype=float)
    k = seq.k
    joint, run = _utilities(kind, data, seq, shares, alpha, k, params, trial_seed, (JOINT,))
    solo = np.zeros(k, dtype=int)
    for i in range(k):
        only = np.zeros(k)
        only[i] = shares[i]
        u, _ = _utilities(kind, data, seq.for_analyst(i), only, alpha, k, params,
                          trial_seed, (SOLO, i))
        solo[i] = u[i]
    loo = None
    if leave_out:
        loo = np.zeros((k, k), dtype=int)
        for j in range(k):
            rest = shares.copy()
            rest[j] = 0.0
            u, _ = _utilities(kind, data, seq.without(j), rest, alpha, k, params,
                              trial_seed, (LEAVE_OUT, j))
            loo[j] = u
    return TrialResult(trial, joint, solo, loo, run.time_steps, run.stalls, len(seq),
                       run.mechanism.ledger.spent)


def run_trial(config, kind, params, trial, leave_out=True):
    """Trial ``trial`` of ``config``: data and sequence from seed ``config.seed + trial``."""
    trial_seed = config.seed + trial
    try:
        data, seq = build_trial(config, trial_seed)
        return evaluate_trial(kind, data, seq, config.shares, config.alpha, params, trial,
                              trial_seed, leave_out)
    except Exception as exc:
        raise RuntimeError(f"{kind}: trial {trial} (seed {trial_seed}) failed: {exc}") from exc


def _run_trial_args(args):
    return run_trial(*args)


def evaluate_scenario(config, mechanism_kind, trials, params=None, leave_out=True, jobs=1):
    """Run ``trials`` independent trials of ``mechanism_kind`` on ``config``.

    Trial ``t`` uses seed ``config.seed + t`` for its data, workloads,
    interleaving and noise, so the report is a deterministic function of the
    arguments. ``jobs > 1`` spreads trials over worker processes; results are
    kept in trial order.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    params = resolve_params(params or MechanismParams(), config.shares, config.alpha, config.n)
    work = [(config, mechanism_kind, params, t, leave_out) for t in range(trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_trial_args, work))
    else:
        results = [run_trial(*w) for w in work]
    return ScenarioReport(config, mechanism_kind, results)
