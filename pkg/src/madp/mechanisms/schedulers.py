"""Query schedulers: decide which analyst's buffered query is answered next."""

from collections import deque
from dataclasses import dataclass, field

import numpy as np

SCHEDULER_KINDS = ("round_robin", "randomized")


@dataclass
class SchedulerState:
    buffers: list
    stall_count: int = 0
    time_steps: int = 0
    answered_at: np.ndarray = None
    order: list = field(default_factory=list)


def scheduler_run(kind, inner, seq, weights=None, seed=0):
    """Drive ``inner`` over ``seq`` under a scheduler.

    One arrival joins its analyst's buffer per time step; then one analyst is
    picked (round robin or sampled from ``weights``) and its oldest buffered
    query is answered, or the step stalls if that buffer is empty. Analysts
    whose whole workload has been answered are never picked again.

    Returns ``(answers, state)`` with ``answers[t]`` the answer to ``seq``
    item ``t``.
    """
    if kind not in SCHEDULER_KINDS:
        raise ValueError(f"unknown scheduler {kind!r}")
    k = seq.k
    if weights is None:
        weights = np.full(k, 1.0 / k)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (k,) or np.any(weights < 0) or weights.sum() <= 0:
        raise ValueError("weights must be a non-negative vector with one entry per analyst")

    total = len(seq)
    queries, analysts = seq.queries, seq.analysts
    unanswered = np.bincount(analysts, minlength=k)
    buffers = [deque() for _ in range(k)]
    state = SchedulerState(buffers=buffers, answered_at=np.zeros(total, dtype=int))
    answers = [None] * total
    rng = np.random.default_rng(seed)

    def cumulative():
        w = np.where(unanswered > 0, weights, 0.0)
        if w.sum() <= 0:
            w = (unanswered > 0).astype(float)
        c = np.cumsum(w)
        return c / c[-1]

    cum = cumulative() if total else None
    cursor = 0
    arrived = answered = 0
    while answered < total:
        state.time_steps += 1
        if arrived < total:
            buffers[analysts[arrived]].append(arrived)
            arrived += 1
        if kind == "round_robin":
            while unanswered[cursor] == 0:
                cursor = (cursor + 1) % k
            pick = cursor
            cursor = (cursor + 1) % k
        else:
            pick = min(int(np.searchsorted(cum, rng.random(), side="right")), k - 1)
            while unanswered[pick] == 0:
                pick = (pick - 1) % k
        if not buffers[pick]:
            state.stall_count += 1
            continue
        t = buffers[pick].popleft()
        answers[t] = inner.answer(queries[t], int(pick))
        state.answered_at[t] = state.time_steps
        state.order.append(t)
        answered += 1
        unanswered[pick] -= 1
        if unanswered[pick] == 0 and answered < total:
            cum = cumulative()
    return answers, state


def efficiency_threshold(kind, k, m, p=None):
    """Query count an inner mechanism must reach for the randomized scheduler.

    ``kind="uniform"``: ``k (ln k + (m - 1) ln ln k)`` with ``m`` the common
    quota. ``kind="nonuniform"``: the same with ``m_max`` scaled by
    ``p_max / p_min``, where ``m`` and ``p`` are per-analyst vectors. The
    ``ln ln k`` term is clamped at 0 for small ``k``.
    """
    if k < 1:
        raise ValueError("k must be positive")
    lnln = max(0.0, np.log(np.log(k))) if k > 1 else 0.0
    if kind == "uniform":
        m = int(np.max(m))
        ratio = 1.0
    elif kind == "nonuniform":
        m_vec = np.broadcast_to(np.asarray(m), (k,))
        p_vec = np.ones(k) if p is None else np.asarray(p, dtype=float)
        if np.any(p_vec <= 0):
            raise ValueError("weights must be positive")
        m = int(m_vec.max())
        ratio = float(p_vec.max() / p_vec.min())
    else:
        raise ValueError(f"unknown threshold kind {kind!r}")
    if m < 1:
        raise ValueError("quotas must be positive")
    return ratio * k * (np.log(k) + (m - 1) * lnln)


def scheduler_efficiency_threshold(kind, k, m, p=None):
    return int(np.ceil(efficiency_threshold(kind, k, m, p) - 1e-12))
