"""Coupon-collector expectations with quotas and unequal draw weights."""

from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

# Integrand values below this are treated as the end of the tail.
TAIL_CUTOFF = 1e-12


class DomainTooSmall(ValueError):
    pass


@dataclass(frozen=True)
class CouponSpec:
    """``k`` coupon types; type ``i`` needs ``m[i]`` copies and is drawn w.p. ``p[i] / sum(p)``."""

    m: tuple
    p: tuple

    def __post_init__(self):
        m = tuple(int(v) for v in self.m)
        p = tuple(float(v) for v in self.p)
        if len(m) != len(p) or not m:
            raise ValueError("m and p must be non-empty and of equal length")
        if min(m) < 1 or min(p) <= 0:
            raise ValueError("quotas and weights must be positive")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "p", p)

    @classmethod
    def uniform(cls, k, m=1):
        return cls((m,) * k, (1.0,) * k)

    @property
    def k(self):
        return len(self.m)


def partial_exp_sum(m, t):
    """First ``m`` terms of the Taylor series of ``exp(t)``."""
    if m < 1:
        raise ValueError("m must be at least 1")
    term, total = 1.0, 1.0
    for j in range(1, m):
        term *= t / j
        total += term
    return total


def _not_done_prob(spec, t):
    # P(type i has fewer than m_i arrivals by time t) = S_{m_i}(p_i t) e^{-p_i t}
    m = np.asarray(spec.m, dtype=float)
    rate_t = np.asarray(spec.p) * t
    tails = np.minimum(special.gammaincc(m, rate_t), 1.0)
    if np.any(tails == 1.0):
        return 1.0
    return -np.expm1(np.sum(np.log1p(-tails)))


def expected_draws(spec):
    """Expected draws until every quota is met, by quadrature of the Poissonised integral."""
    p = np.asarray(spec.p)
    total = p.sum()
    # the integrand drops below TAIL_CUTOFF past this point for every type
    upper = 1.0
    while _not_done_prob(spec, upper) > TAIL_CUTOFF:
        upper *= 2.0
    pieces = np.unique(np.concatenate([[0.0], np.geomspace(1e-3, upper, 24), [upper]]))
    value = 0.0
    for a, b in zip(pieces[:-1], pieces[1:]):
        part, _ = integrate.quad(lambda t: _not_done_prob(spec, t), a, b,
                                 epsabs=0.0, epsrel=1e-10, limit=200)
        value += part
    return total * value


def uniform_closed_form(k, m=1):
    """``k (ln k + (m - 1) ln ln k)``: the uniform asymptotic with o(1) dropped."""
    if k < 3:
        raise DomainTooSmall("the asymptotic form needs k >= 3")
    if m < 1:
        raise ValueError("m must be at least 1")
    return k * (np.log(k) + (m - 1) * np.log(np.log(k)))


def nonuniform_upper_bound(spec):
    if spec.k < 3:
        raise DomainTooSmall("the asymptotic form needs k >= 3")
    ratio = max(spec.p) / min(spec.p)
    return ratio * uniform_closed_form(spec.k, max(spec.m))


def monte_carlo_draws(spec, trials, seed=0):
    """Simulate the draw process ``trials`` times; returns ``(mean, stderr)``."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    rng = np.random.default_rng(seed)
    k = spec.k
    cdf = np.cumsum(spec.p) / np.sum(spec.p)
    # per tracked trial: copies still missing of each type (flat), and in total;
    # finished trials are dropped from the arrays once half of them are done
    missing = np.tile(np.asarray(spec.m, dtype=np.int64), trials)
    left = np.full(trials, sum(spec.m), dtype=np.int64)
    ids = np.arange(trials)
    draws = np.zeros(trials, dtype=np.int64)
    live = trials
    step = 0
    while live:
        step += 1
        alive = left > 0
        c = np.zeros(ids.size, dtype=np.int64)
        c[alive] = np.searchsorted(cdf, rng.random(live), side="right")
        flat = np.arange(0, ids.size * k, k) + np.minimum(c, k - 1)
        useful = alive & (missing[flat] > 0)
        missing[flat[useful]] -= 1
        left -= useful
        done = useful & (left == 0)
        if done.any():
            draws[ids[done]] = step
            live -= int(done.sum())
            if 2 * live <= ids.size:
                keep = left > 0
                ids, left = ids[keep], left[keep]
                missing = missing.reshape(-1, k)[keep].ravel()
    mean = float(draws.mean())
    stderr = float(draws.std(ddof=1) / np.sqrt(trials)) if trials > 1 else 0.0
    return mean, stderr
