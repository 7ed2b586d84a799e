"""Experiment orchestration behind the command-line subcommands.

Every function here is a pure function of its :class:`RunConfig`: rows come
back in a fixed order and all randomness is derived from ``config.seed``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from madp.coupon import (
    CouponSpec,
    DomainTooSmall,
    expected_draws,
    monte_carlo_draws,
    nonuniform_upper_bound,
    uniform_closed_form,
)
from madp.mechanisms import MECHANISM_KINDS, MechanismParams, PMWParams
from madp.mechanisms.zoo import resolve_params
from madp.metrics import (
    ScenarioReport,
    empirical_interference,
    evaluate_scenario,
    evaluate_trial,
    max_ratio_error,
)
from madp.workloads import ScenarioConfig, adversarial_sequences, synthetic_data

CSV_COLUMNS = (
    "trial", "mechanism", "p", "epsilon", "alpha", "analyst", "utility_joint",
    "utility_independent", "ratio", "interference", "time_steps", "stalls",
)
SUMMARY_COLUMNS = ("p", "mechanism", "analyst", "statistic", "mean", "lo", "hi")
COUPON_COLUMNS = ("k", "m", "exact", "monte_carlo", "stderr", "asymptotic", "upper_bound")

SWEEP_MECHANISMS = ("independent_pmw", "pmw", "scr", "round_robin_pmw", "randomized_pmw")
INTERVAL_LEVEL = 0.90
BOOTSTRAP_RESAMPLES = 1000


class ConfigError(ValueError):
    """Invalid run configuration; the CLI maps it to exit code 2."""


@dataclass
class RunConfig:
    """Everything a subcommand needs. Keys of a config file map onto these fields.

    ``None`` for ``p_grid`` / ``mechanisms`` means "the subcommand's default".
    Amounts on the fractional scale: ``alpha``; on the count scale: nothing here.
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
    mechanism: str = "scr"
    mechanisms: tuple | None = None
    p_grid: tuple | None = None
    gamma: float = 0.25
    basis: str = "hierarchical"
    lam: float | None = None
    pmw_threshold: float | None = None
    pmw_learning_rate: float | None = None
    pmw_expected_updates: int | None = None
    laplace_queries: int | None = None
    noise: str = "stream"
    leave_out: bool = True
    trials: int = 200
    jobs: int = 1
    out: str | None = None
    k_values: tuple = (2, 3, 5, 10, 20)
    m_values: tuple = (1, 2, 3)

    def scenario(self, p=None):
        try:
            return ScenarioConfig(
                k=self.k, d=self.d, epsilon=self.epsilon, shares=self.shares,
                alpha=self.alpha, p=self.p if p is None else p, seed=self.seed, n=self.n,
                workload=self.workload, queries_per_analyst=self.queries_per_analyst,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def mechanism_params(self):
        pmw = PMWParams(threshold=self.pmw_threshold, learning_rate=self.pmw_learning_rate,
                        expected_updates=self.pmw_expected_updates)
        return MechanismParams(gamma=self.gamma, basis=self.basis, lam=self.lam, pmw=pmw,
                               laplace_queries=self.laplace_queries, noise=self.noise)

    def validate(self):
        if self.trials < 1 or self.jobs < 1:
            raise ConfigError("trials and jobs must be at least 1")
        if not 0 < self.gamma <= 1:
            raise ConfigError("gamma must lie in (0, 1]")
        if self.basis not in ("hierarchical", "identity"):
            raise ConfigError(f"unknown basis {self.basis!r}")
        if self.noise not in ("stream", "keyed"):
            raise ConfigError(f"unknown noise mode {self.noise!r}")
        for kind in [self.mechanism, *(self.mechanisms or ())]:
            if kind not in MECHANISM_KINDS:
                raise ConfigError(f"unknown mechanism {kind!r}; choose from {MECHANISM_KINDS}")
        for p in self.p_grid or ():
            if not 0 <= p <= 1:
                raise ConfigError(f"p grid value {p} outside [0, 1]")
        if min(self.k_values, default=1) < 1 or min(self.m_values, default=1) < 1:
            raise ConfigError("coupon k and m values must be positive")
        self.scenario()
        return self


COMMAND_DEFAULTS = {
    # two analysts asking the same random point/range workload on their own
    # half of the domain; long enough that Alice alone can drain PMW at p=1
    "motivate": dict(k=2, workload="mirrored", queries_per_analyst=500,
                     p_grid=(0.5, 0.6, 0.7, 0.8, 0.9, 1.0),
                     mechanisms=("pmw", "laplace_split"), leave_out=False),
    "sweep": dict(k=10, workload="mixed", queries_per_analyst=64,
                  p_grid=(0.01, 0.1, 0.9), mechanisms=SWEEP_MECHANISMS),
    "adversarial": dict(k=2, mechanisms=("laplace_split", "scr"), leave_out=False),
    # for coupon, trials counts Monte Carlo repetitions per (k, m)
    "coupon": dict(trials=100_000),
}

_TUPLE_FIELDS = {"shares", "mechanisms", "p_grid", "k_values", "m_values"}


def make_config(command, overrides=None):
    """Subcommand defaults updated with ``overrides`` (config file, then flags)."""
    if command not in COMMAND_DEFAULTS:
        raise ConfigError(f"unknown command {command!r}")
    values = dict(COMMAND_DEFAULTS[command])
    known = {f.name for f in fields(RunConfig)}
    for key, val in (overrides or {}).items():
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        if key in _TUPLE_FIELDS and val is not None:
            val = tuple(val) if isinstance(val, (list, tuple)) else (val,)
        values[key] = val
    try:
        cfg = RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.validate()


def config_dict(cfg):
    """Plain-data view of ``cfg`` for meta.json; the output path is left out so
    that reruns into different directories produce identical files."""
    out = asdict(cfg)
    out.pop("out")
    return {k: list(v) if isinstance(v, tuple) else v for k, v in out.items()}


# -- intervals -----------------------------------------------------------------


def _bootstrap(values, stat, seed):
    """Percentile bootstrap interval of ``stat`` over the leading (trial) axis."""
    values = np.asarray(values, dtype=float)
    point = stat(values)
    if values.shape[0] < 2:
        return point, point, point
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, values.shape[0], size=(BOOTSTRAP_RESAMPLES, values.shape[0]))
    draws = np.array([stat(values[i]) for i in idx])
    tail = (1 - INTERVAL_LEVEL) / 2 * 100
    finite = draws[np.isfinite(draws)]
    if finite.size < draws.size:
        hi = math.inf
        lo = float(np.percentile(finite, tail)) if finite.size else math.inf
        return point, lo, hi
    lo, hi = np.percentile(draws, [tail, 100 - tail])
    return point, float(lo), float(hi)


def _max_ratio_of_means(pairs):
    # pairs[:, 0, i] independent, pairs[:, 1, i] joint
    return max_ratio_error(pairs[:, 0].mean(axis=0), pairs[:, 1].mean(axis=0))


def summarize(report, seed):
    """Long-format summary rows for one scenario report."""
    p, kind = report.config.p, report.mechanism
    joint = np.array([t.joint for t in report.trials], dtype=float)
    solo = np.array([t.solo for t in report.trials], dtype=float)
    rows = []

    def add(analyst, statistic, triple):
        rows.append(dict(p=p, mechanism=kind, analyst=analyst, statistic=statistic,
                         mean=triple[0], lo=triple[1], hi=triple[2]))

    mean = lambda v: float(v.mean())  # noqa: E731
    for i in range(report.config.k):
        add(i, "utility", _bootstrap(joint[:, i], mean, [seed, 1, i]))
        add(i, "utility_independent", _bootstrap(solo[:, i], mean, [seed, 2, i]))
        add(i, "ratio", _bootstrap(np.stack([solo[:, [i]], joint[:, [i]]], axis=1),
                                   _max_ratio_of_means, [seed, 3, i]))
    add("all", "utility", _bootstrap(joint.sum(axis=1), mean, [seed, 4]))
    add("all", "max_ratio_error",
        _bootstrap(np.stack([solo, joint], axis=1), _max_ratio_of_means, [seed, 5]))
    if report.mean_leave_out is not None:
        loo = np.array([t.leave_out for t in report.trials], dtype=float)

        def interference(idx):
            return empirical_interference(joint[idx].mean(axis=0), loo[idx].mean(axis=0))

        add("all", "empirical_interference",
            _bootstrap(np.arange(len(report.trials)),
                       lambda ix: interference(ix.astype(int)), [seed, 6]))
    steps = np.array([t.time_steps for t in report.trials], dtype=float)
    sizes = np.array([t.n_queries for t in report.trials], dtype=float)
    add("all", "time_to_completion", _bootstrap(steps, mean, [seed, 7]))
    add("all", "queries", _bootstrap(sizes, mean, [seed, 8]))
    return rows


# -- commands ------------------------------------------------------------------


@dataclass
class CommandResult:
    trials: list = field(default_factory=list)
    summary: list = field(default_factory=list)
    reports: list = field(default_factory=list)
    verdict: str = ""
    meta: dict = field(default_factory=dict)


def _grid_reports(cfg, mechanisms):
    params = cfg.mechanism_params()
    result = CommandResult()
    for p in cfg.p_grid:
        scenario = cfg.scenario(p)
        for kind in mechanisms:
            report = evaluate_scenario(scenario, kind, cfg.trials, params=params,
                                       leave_out=cfg.leave_out, jobs=cfg.jobs)
            result.reports.append(report)
            result.trials.extend(report.rows())
            result.summary.extend(summarize(report, cfg.seed))
    result.meta = dict(
        config=config_dict(cfg),
        intervals=f"{INTERVAL_LEVEL:.0%} percentile bootstrap over trials "
                  f"({BOOTSTRAP_RESAMPLES} resamples)",
    )
    return result


def run_motivate(cfg):
    """Two analysts, PMW and split-Laplace, across the ordering-skew grid."""
    return _grid_reports(cfg, cfg.mechanisms)


def run_sweep(cfg):
    """Every sweep mechanism across the p grid with all fairness measures."""
    return _grid_reports(cfg, cfg.mechanisms)


def run_adversarial(cfg):
    """Greedy pooled split-Laplace and SCR on the shared-prefix sequences Q and Q'."""
    alpha_count = cfg.alpha * cfg.n
    shares = np.asarray(cfg.scenario().shares)
    params = cfg.mechanism_params()
    reports = {}
    meta = {}
    for kind in cfg.mechanisms:
        kind_params = resolve_params(params, shares, cfg.alpha, cfg.n)
        for which in ("Q", "Qprime"):
            reports[kind, which] = ScenarioReport(cfg.scenario(1.0), f"{kind}:{which}")
        for t in range(cfg.trials):
            trial_seed = cfg.seed + t
            inst = adversarial_sequences(alpha_count, cfg.epsilon, cfg.k, cfg.d, seed=trial_seed)
            meta.update(d_big=inst.d_big, d_small=inst.d_small)
            data = synthetic_data(cfg.d, cfg.n, seed=trial_seed)
            for which, seq in (("Q", inst.Q), ("Qprime", inst.Qprime)):
                res = evaluate_trial(kind, data, seq, shares, cfg.alpha, kind_params, t,
                                     trial_seed, leave_out=cfg.leave_out)
                reports[kind, which].trials.append(res)
    result = CommandResult(reports=list(reports.values()))
    for report in result.reports:
        for row in report.rows():
            row["p"] = None
            result.trials.append(row)
    lines = [f"prefix length d={meta['d_big']}, other analysts d'={meta['d_small']} each"]
    for (kind, which), report in reports.items():
        util = " ".join(f"{u:.2f}/{s:.2f}" for u, s in zip(report.mean_joint, report.mean_solo))
        lines.append(f"{kind:>14s} on {which:<6s} joint/independent utility {util}  "
                     f"max ratio error {report.max_ratio_error:.3f}")
    greedy = reports.get(("laplace_split", "Qprime"))
    scr = reports.get(("scr", "Qprime"))
    if greedy is not None and scr is not None:
        ok = greedy.max_ratio_error > 1 and scr.max_ratio_error <= 1.1
        lines.append(
            ("greedy violates the sharing incentive on Q' while SCR does not"
             if ok else "expected separation between greedy and SCR NOT observed")
        )
    result.verdict = "\n".join(lines) + "\n"
    result.meta = dict(config=config_dict(cfg), **meta)
    return result


def coupon_rows(cfg):
    """Exact, simulated and asymptotic coupon-collector draws per (k, m)."""
    rows = []
    for k in cfg.k_values:
        for m in cfg.m_values:
            spec = CouponSpec.uniform(k, m)
            mc, se = monte_carlo_draws(spec, cfg.trials, seed=[cfg.seed, k, m])
            try:
                asym = uniform_closed_form(k, m)
                upper = nonuniform_upper_bound(spec)
            except DomainTooSmall:
                asym = upper = None
            rows.append(dict(k=k, m=m, exact=expected_draws(spec), monte_carlo=mc, stderr=se,
                             asymptotic=asym, upper_bound=upper))
    return rows
