"""Data vectors, query workloads and multi-analyst query sequences."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

WORKLOAD_KINDS = ("identity", "prefix", "hierarchical", "random_range", "random_point")


class InvalidSubset(ValueError):
    pass


class NoFeasibleD(ValueError):
    pass


@dataclass(frozen=True)
class DataVector:
    """Fractional counts over ``d`` disjoint cells of a database of ``n`` records."""

    cells: np.ndarray
    n: int

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=float)
        if cells.ndim != 1 or cells.size < 1:
            raise ValueError("cells must be a non-empty vector")
        if np.any(cells < 0) or np.any(cells > 1):
            raise ValueError("cells must lie in [0, 1]")
        if abs(cells.sum() - 1.0) > 1e-9:
            raise ValueError(f"cells must sum to 1, got {cells.sum()!r}")
        if self.n < 1:
            raise ValueError("n must be a positive record count")
        object.__setattr__(self, "cells", cells)

    @property
    def d(self):
        return self.cells.size

    @property
    def counts(self):
        return self.cells * self.n


def check_query(q, d=None):
    """Validate a linear query and return it as a float array."""
    q = np.asarray(q, dtype=float)
    if q.ndim != 1 or (d is not None and q.size != d):
        raise ValueError(f"query must be a vector of length {d}")
    if not np.all(np.isfinite(q)):
        raise ValueError("query has non-finite coefficients")
    if np.max(np.abs(q)) > 1 + 1e-12:
        raise ValueError("query sensitivity exceeds 1")
    return q


@dataclass
class QuerySequence:
    """Queries in arrival order, each tagged with the asking analyst."""

    queries: np.ndarray
    analysts: np.ndarray
    k: int

    def __post_init__(self):
        self.queries = np.atleast_2d(np.asarray(self.queries, dtype=float))
        self.analysts = np.asarray(self.analysts, dtype=int).reshape(-1)
        if self.queries.shape[0] != self.analysts.size:
            raise ValueError("one analyst id per query is required")
        if self.analysts.size and (self.analysts.min() < 0 or self.analysts.max() >= self.k):
            raise ValueError(f"analyst ids must lie in [0, {self.k})")

    @classmethod
    def empty(cls, d, k):
        return cls(np.zeros((0, d)), np.zeros(0, dtype=int), k)

    @property
    def d(self):
        return self.queries.shape[1]

    def __len__(self):
        return self.analysts.size

    def __iter__(self):
        return zip(self.queries, self.analysts.tolist())

    def counts(self):
        return np.bincount(self.analysts, minlength=self.k)

    def restrict(self, keep):
        """Subsequence asked by the analysts for which ``keep[i]`` is true."""
        keep = np.asarray(keep, dtype=bool)
        mask = keep[self.analysts]
        return QuerySequence(self.queries[mask], self.analysts[mask], self.k)

    def for_analyst(self, i):
        keep = np.zeros(self.k, dtype=bool)
        keep[i] = True
        return self.restrict(keep)

    def without(self, j):
        keep = np.ones(self.k, dtype=bool)
        keep[j] = False
        return self.restrict(keep)

    def to_lines(self):
        return [
            f"{a}\t" + ",".join(repr(float(c)) for c in q)
            for q, a in zip(self.queries, self.analysts.tolist())
        ]

    @classmethod
    def from_lines(cls, lines: Iterable[str], k=None):
        queries, analysts = [], []
        for line in lines:
            line = line.strip()
            if not line:
                continue
            head, coeffs = line.split("\t")
            analysts.append(int(head))
            queries.append([float(c) for c in coeffs.split(",")])
        if not queries:
            raise ValueError("no queries in input")
        if k is None:
            k = max(analysts) + 1
        return cls(np.array(queries), np.array(analysts), k)


@dataclass
class ScenarioConfig:
    """One multi-analyst scenario.

    ``shares`` are absolute budgets (they sum to ``epsilon``); ``alpha`` is an
    error threshold on the fractional scale. ``workload`` selects how each
    trial's per-analyst workloads are drawn: ``"mixed"`` assigns every analyst
    a random workload kind over the whole domain or a random subset,
    ``"mirrored"`` gives every analyst the same random point/range workload on
    its own equal slice of the domain.
    """

    k: int = 2
    d: int = 86
    epsilon: float = 1.0
    shares: tuple | None = None
    alpha: float = 0.01
    p: float = 0.5
    seed: int = 0
    n: int = 100_000
    workload: str = "mixed"
    queries_per_analyst: int = 64

    def __post_init__(self):
        if self.k < 1 or self.d < 1:
            raise ValueError("k and d must be positive")
        if self.epsilon <= 0 or self.alpha <= 0:
            raise ValueError("epsilon and alpha must be positive")
        if not 0 <= self.p <= 1:
            raise ValueError("p must lie in [0, 1]")
        if self.shares is None:
            self.shares = tuple([self.epsilon / self.k] * self.k)
        self.shares = tuple(float(s) for s in self.shares)
        if len(self.shares) != self.k or min(self.shares) <= 0:
            raise ValueError("need one positive share per analyst")
        if abs(sum(self.shares) - self.epsilon) > 1e-9:
            raise ValueError("shares must sum to epsilon")
        if self.workload not in ("mixed", "mirrored"):
            raise ValueError(f"unknown workload mode {self.workload!r}")
        if self.workload == "mirrored" and self.d < self.k:
            raise ValueError("mirrored workloads need d >= k")


def synthetic_data(d=86, n=100_000, seed=0):
    """Smooth, lumpy histogram standing in for an age-by-count table.

    A mixture of a few Gaussian bumps over the cell index is perturbed with
    gamma noise and then ``n`` records are drawn from it, so the result has
    resolution ``1/n`` like a real table.
    """
    if d < 1 or n < 1:
        raise ValueError("d and n must be positive")
    if d == 1:
        return DataVector(np.ones(1), n)
    rng = np.random.default_rng([seed, 0xDA7A])
    grid = np.arange(d)
    density = np.full(d, 0.05)
    for _ in range(rng.integers(2, 5)):
        center = rng.uniform(0, d)
        width = rng.uniform(0.05, 0.3) * d
        density += rng.uniform(0.5, 2.0) * np.exp(-0.5 * ((grid - center) / width) ** 2)
    density *= rng.gamma(4.0, 0.25, size=d)
    density /= density.sum()
    counts = rng.multinomial(n, density)
    cells = counts / n
    cells = cells / cells.sum()
    return DataVector(cells, n)


def _subset_bounds(d, subset):
    if subset is None:
        return 0, d
    lo, hi = subset
    if not (0 <= lo < hi <= d):
        raise InvalidSubset(f"subset [{lo}, {hi}) is empty or outside [0, {d})")
    return int(lo), int(hi)


def _interval(d, lo, hi):
    q = np.zeros(d)
    q[lo:hi] = 1.0
    return q


def tree_intervals(lo, hi):
    """Half-open intervals of a binary tree over ``[lo, hi)`` in breadth-first order."""
    out = []
    level = [(lo, hi)]
    while level:
        nxt = []
        for a, b in level:
            out.append((a, b))
            if b - a > 1:
                mid = (a + b) // 2
                nxt.extend([(a, mid), (mid, b)])
        level = nxt
    return out


def workload(kind, d, size=None, subset=None, seed=0):
    """Build a list of sensitivity-1 counting queries.

    ``size`` only matters for the random kinds. ``subset`` is a half-open
    cell range that bounds the support of every query.
    """
    lo, hi = _subset_bounds(d, subset)
    if kind == "identity":
        return [_interval(d, j, j + 1) for j in range(lo, hi)]
    if kind == "prefix":
        return [_interval(d, lo, j + 1) for j in range(lo, hi)]
    if kind == "hierarchical":
        return [_interval(d, a, b) for a, b in tree_intervals(lo, hi)]
    if kind in ("random_range", "random_point"):
        if size is None or size < 0:
            raise ValueError("random workloads need a non-negative size")
        rng = np.random.default_rng([seed, 0xB0B])
        if kind == "random_point":
            cells = rng.integers(lo, hi, size=size)
            return [_interval(d, j, j + 1) for j in cells.tolist()]
        ends = rng.integers(lo, hi, size=(size, 2))
        return [_interval(d, min(a, b), max(a, b) + 1) for a, b in ends.tolist()]
    raise ValueError(f"unknown workload kind {kind!r}")


def interleave(per_analyst: Sequence[Sequence[np.ndarray]], p, seed=0, d=None):
    """Merge per-analyst query lists into one arrival sequence.

    At each step analyst 0 is picked with probability ``p`` and every other
    analyst with ``(1 - p) / (k - 1)``, renormalised over analysts that still
    have queries left. Each analyst's queries keep their relative order.
    """
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    k = len(per_analyst)
    lengths = [len(qs) for qs in per_analyst]
    if k == 0 or sum(lengths) == 0:
        raise ValueError("need at least one non-empty query list")
    if d is None:
        d = len(next(qs for qs in per_analyst if len(qs))[0])
    base = np.full(k, (1 - p) / (k - 1)) if k > 1 else np.ones(1)
    base[0] = p if k > 1 else 1.0
    total = sum(lengths)
    rng = np.random.default_rng([seed, 0x1EAF])
    u = rng.random(total)
    left = np.array(lengths)
    pos = np.zeros(k, dtype=int)
    order = np.empty(total, dtype=int)

    def cumulative():
        w = np.where(left > 0, base, 0.0)
        if w.sum() <= 0:
            w = (left > 0).astype(float)
        c = np.cumsum(w)
        return c / c[-1]

    cum = cumulative()
    for t in range(total):
        a = int(np.searchsorted(cum, u[t], side="right"))
        a = min(a, k - 1)
        while left[a] == 0:  # round-off at a cdf boundary
            a = (a - 1) % k
        order[t] = a
        left[a] -= 1
        if left[a] == 0 and t + 1 < total:
            cum = cumulative()

    queries = np.empty((total, d))
    for t, a in enumerate(order.tolist()):
        queries[t] = per_analyst[a][pos[a]]
        pos[a] += 1
    return QuerySequence(queries, order, k)


def _cube_lt(c, bound_sq):
    # c**1.5 < sqrt(bound_sq) without rounding trouble at exact cubes
    return c**3 < bound_sq * (1 - 1e-12)


def query_limit(alpha, epsilon, k):
    """``floor((alpha * epsilon / k) ** (2/3))``, exact at perfect cubes."""
    if alpha <= 0 or epsilon <= 0 or k < 1:
        raise ValueError("alpha, epsilon and k must be positive")
    target = (alpha * epsilon / k) ** 2
    c = int(math.floor(target ** (1.0 / 3.0)))
    while (c + 1) ** 3 <= target * (1 + 1e-12):
        c += 1
    while c > 0 and c**3 > target * (1 + 1e-12):
        c -= 1
    return c


def _largest_below(bound_sq):
    """Largest integer c >= 0 with c**1.5 < sqrt(bound_sq)."""
    c = int(math.floor(bound_sq ** (1.0 / 3.0))) + 1
    while c > 0 and not _cube_lt(c, bound_sq):
        c -= 1
    return c


@dataclass
class AdversarialInstance:
    Q: QuerySequence
    Qprime: QuerySequence
    Qdoubleprime: QuerySequence
    d_big: int
    d_small: int
    parts: list = field(default_factory=list)


def _random_signed_queries(rng, d, lo, hi, count, distinct=True):
    width = hi - lo
    out, seen = [], set()
    room = 3**width - 1 if width < 40 else float("inf")
    distinct = distinct and room >= count
    while len(out) < count:
        q = np.zeros(d)
        q[lo:hi] = rng.integers(-1, 2, size=width)
        if not q.any():
            continue
        key = q.tobytes()
        if distinct and key in seen:
            continue
        seen.add(key)
        out.append(q)
    return out


def adversarial_sequences(alpha, epsilon, k, d, seed=0):
    """Query sequences Q, Q', Q'' that share a long prefix from analyst 0.

    ``alpha`` is on the count scale here. Analyst 0 asks ``d_big`` random
    queries on the first of ``k`` equal cell partitions. In Q the other
    analysts repeat the first ``d_small`` of them; in Q' they ask ``d_small``
    fresh queries on their own partitions; in Q'' they ask one query each.
    """
    if k < 2:
        raise NoFeasibleD("the construction needs at least two analysts")
    if d < 2 * k:
        raise NoFeasibleD(f"need d >= 2k, got d={d}, k={k}")
    ae_sq = (alpha * epsilon) ** 2
    d_big = _largest_below(ae_sq)
    if d_big < 1 or not (k * d_big**1.5 / epsilon > alpha):
        raise NoFeasibleD(
            f"no integer d with d^1.5/eps < alpha < k d^1.5/eps "
            f"(alpha={alpha}, eps={epsilon}, k={k})"
        )
    d_small = _largest_below(ae_sq / k**2)
    total = d_big + (k - 1) * d_small
    if d_small < 1 or not (total**1.5 / epsilon > alpha):
        raise NoFeasibleD(
            f"no integer d' with k d'^1.5/eps < alpha < (d + (k-1)d')^1.5/eps "
            f"(alpha={alpha}, eps={epsilon}, k={k})"
        )
    width = d // k
    parts = [(i * width, (i + 1) * width) for i in range(k)]
    rng = np.random.default_rng([seed, 0xAD5])
    prefix = _random_signed_queries(rng, d, *parts[0], d_big)

    def build(tails):
        queries = list(prefix)
        analysts = [0] * len(prefix)
        for i, qs in enumerate(tails, start=1):
            queries.extend(qs)
            analysts.extend([i] * len(qs))
        return QuerySequence(np.array(queries), np.array(analysts), k)

    same = [prefix[:d_small] for _ in range(1, k)]
    fresh = [_random_signed_queries(rng, d, *parts[i], d_small) for i in range(1, k)]
    single = [_random_signed_queries(rng, d, *parts[i], 1) for i in range(1, k)]
    return AdversarialInstance(build(same), build(fresh), build(single), d_big, d_small, parts)


# -- per-trial scenario construction -----------------------------------------

MIXED_KINDS = ("random_range", "identity", "prefix", "hierarchical")


def _random_subset(rng, d):
    width = int(rng.integers(max(1, d // 4), max(2, d // 2) + 1))
    width = min(width, d)
    lo = int(rng.integers(0, d - width + 1))
    return lo, lo + width


def analyst_workloads(config: ScenarioConfig, seed):
    """Per-analyst query lists for one trial of ``config``."""
    rng = np.random.default_rng([seed, 0x5CE])
    d, k = config.d, config.k
    if config.workload == "mirrored":
        width = d // k
        base = []
        for _ in range(config.queries_per_analyst):
            if rng.random() < 0.5:
                j = int(rng.integers(0, width))
                base.append((j, j + 1))
            else:
                a, b = sorted(rng.integers(0, width, size=2).tolist())
                base.append((a, b + 1))
        return [[_interval(d, i * width + a, i * width + b) for a, b in base] for i in range(k)]
    out = []
    for i in range(k):
        kind = MIXED_KINDS[int(rng.integers(len(MIXED_KINDS)))]
        subset = _random_subset(rng, d) if rng.random() < 0.5 else None
        qs = workload(kind, d, size=config.queries_per_analyst, subset=subset,
                      seed=int(rng.integers(2**31)))
        out.append(qs)
    return out


def build_trial(config: ScenarioConfig, trial_seed):
    """Data vector and interleaved query sequence for one trial."""
    data = synthetic_data(config.d, config.n, seed=trial_seed)
    per_analyst = analyst_workloads(config, trial_seed)
    seq = interleave(per_analyst, config.p, seed=trial_seed, d=config.d)
    return data, seq
