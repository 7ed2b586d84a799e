import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from madp.mechanisms import (
    PMW,
    BudgetExceeded,
    BudgetLedger,
    KeyedNoise,
    LaplaceSplit,
    MechanismAnswer,
    MechanismParams,
    PMWParams,
    PMWState,
    SeededCacheReconstruct,
    StreamNoise,
    basis_matrix,
    build_mechanism,
    efficiency_threshold,
    laplace_uniform_split,
    pmw_answer,
    resolve_params,
    run_sequence,
    scheduler_efficiency_threshold,
    scheduler_run,
)
from madp.mechanisms.zoo import MECHANISM_KINDS
from madp.workloads import DataVector, QuerySequence, interleave, synthetic_data, workload


class Recorder:
    """Inner mechanism that records the order of calls."""

    def __init__(self):
        self.calls = []

    def answer(self, q, analyst):
        self.calls.append((analyst, float(q[0])))
        return MechanismAnswer(0.0, 0.0, "synthetic")


def tagged_sequence(analysts, k):
    analysts = np.asarray(analysts)
    queries = np.zeros((analysts.size, 2))
    queries[:, 0] = np.arange(analysts.size)
    return QuerySequence(queries, analysts, k)


@pytest.fixture
def data():
    return synthetic_data(16, 100_000, seed=3)


# -- ledger and answer contract -------------------------------------------------


def test_ledger_tracks_and_refuses():
    led = BudgetLedger(1.0, allowances=[0.5, 0.5])
    led.charge(0.4, analyst=0, step=1)
    assert led.per_analyst_remaining[0] == pytest.approx(0.1)
    assert not led.can_afford(0.2, analyst=0)
    with pytest.raises(BudgetExceeded):
        led.charge(0.2, analyst=0)
    led.charge(0.5, analyst=1, step=2)
    assert led.spent == pytest.approx(0.9)
    assert led.spent_log == [(1, 0, 0.4), (2, 1, 0.5)]
    with pytest.raises(BudgetExceeded):
        led.charge(0.2)


def test_free_paths_cannot_spend():
    with pytest.raises(ValueError):
        MechanismAnswer(1.0, 0.1, "cache_hit")
    with pytest.raises(ValueError):
        MechanismAnswer(1.0, 0.0, "bogus")


# -- Laplace --------------------------------------------------------------------


def test_zero_query_has_no_noise(data):
    mech = LaplaceSplit(data, 1.0, 5, StreamNoise(0))
    assert mech.answer(np.zeros(data.d)).value == 0.0


def test_laplace_split_scale_and_refusal(data):
    q = np.zeros(data.d)
    q[2] = 1
    mech = laplace_uniform_split(data, 1, 1.0, StreamNoise(0))
    assert mech.per_query == 1.0
    first = mech.answer(q)
    assert first.path == "direct" and first.budget_spent == 1.0
    refused = mech.answer(q)
    assert refused.path == "refused" and np.isnan(refused.value)
    assert mech.ledger.spent == 1.0


def test_laplace_split_mean_error():
    data = DataVector(np.array([1.0]), 1000)
    t = 20
    mech = laplace_uniform_split(data, 100_000, 100_000 / t, StreamNoise(1))
    errs = [abs(mech.answer(np.ones(1)).value - 1000) for _ in range(100_000)]
    assert np.mean(errs) == pytest.approx(t, rel=0.02)


def test_keyed_noise_is_reproducible_and_laplace():
    a, b = KeyedNoise(4), KeyedNoise(4)
    assert a.laplace(2.0, b"q") == b.laplace(2.0, b"q")
    assert a.laplace(2.0, b"q") != KeyedNoise(5).laplace(2.0, b"q")
    draws = np.array([a.unit(str(i).encode()) for i in range(40_000)])
    assert np.mean(np.abs(draws)) == pytest.approx(1.0, rel=0.03)
    assert abs(np.mean(draws)) < 0.03


# -- PMW ------------------------------------------------------------------------


def test_pmw_zero_difference_uses_synthetic():
    x = DataVector(np.full(4, 0.25), 1000)
    state = PMWState.initial(4, 1000, 1.0, 0.01, PMWParams(threshold=10.0))
    ans, new = pmw_answer(state, np.array([1.0, 1, 0, 0]), x, StreamNoise(0))
    assert ans.path == "synthetic" and ans.budget_spent == 0
    assert ans.value == pytest.approx(500.0)
    assert new is state


def test_pmw_update_moves_mass_toward_truth():
    x = DataVector(np.array([0.97, 0.01, 0.01, 0.01]), 100_000)
    state = PMWState.initial(4, x.n, 1.0, 0.01, PMWParams(threshold=1e-6, threshold_noise=0.0))
    q = np.array([1.0, 0, 0, 0])
    ans, new = pmw_answer(state, q, x, StreamNoise(0))
    assert ans.path == "direct" and ans.budget_spent == state.update_budget
    assert new.synthetic[0] > state.synthetic[0]
    assert new.synthetic.sum() == pytest.approx(1.0, abs=1e-9)
    assert new.remaining_budget == pytest.approx(1.0 - state.update_budget)


def test_pmw_defaults():
    s = PMWState.initial(86, 100_000, 1.0, 0.01)
    assert s.threshold == 0.005
    assert s.learning_rate == 0.00125
    assert s.update_budget == pytest.approx(1.0 / (2 * 172))
    assert s.threshold_noise == pytest.approx(2 / (s.update_budget * 100_000))


def test_pmw_exhausted_answers_from_synthetic(data):
    mech = PMW(data, 1.0, 0.01, StreamNoise(0),
               PMWParams(expected_updates=1, threshold=0.0, threshold_noise=0.0))
    paths = [mech.answer(q).path for q in workload("identity", data.d)]
    assert paths.count("direct") == 2
    assert set(paths[2:]) == {"synthetic"}
    assert mech.ledger.spent <= 1.0 + 1e-12


def test_pmw_free_steps_leave_ledger_alone(data):
    mech = PMW(data, 1.0, 0.01, StreamNoise(2))
    for q in workload("random_range", data.d, size=60, seed=1):
        before = mech.ledger.spent
        ans = mech.answer(q)
        if ans.budget_spent == 0:
            assert mech.ledger.spent == before


# -- SCR ------------------------------------------------------------------------


def test_basis_matrices():
    assert basis_matrix("identity", 3).shape == (3, 3)
    h = basis_matrix("hierarchical", 86)
    assert h.shape == (171, 86)
    assert np.linalg.matrix_rank(h) == 86


def test_scr_direct_cache_hit_and_reconstruct(data):
    lam = 0.1
    scr = SeededCacheReconstruct(data, [0.5, 0.5], lam, StreamNoise(0), gamma=0.2)
    assert scr.ledger.spent == pytest.approx(0.2)
    q = np.zeros(data.d)
    q[[1, 5]] = 1
    first = scr.answer(q, 0)
    assert first.path == "direct"
    assert scr.ledger.per_analyst_remaining[0] == pytest.approx(0.4 - lam)
    again = scr.answer(q, 1)
    assert again.path == "cache_hit" and again.value == first.value
    assert scr.ledger.per_analyst_remaining[1] == pytest.approx(0.4)
    for _ in range(3):
        q = q.copy()
        q[np.argmin(q)] = 1
        scr.answer(q, 0)
    assert scr.ledger.per_analyst_remaining[0] < lam
    before = scr.ledger.spent
    out = scr.answer(np.eye(data.d)[7] - np.eye(data.d)[9], 0)
    assert out.path == "reconstruct" and scr.ledger.spent == before


def test_scr_seed_rows_hit_the_cache(data):
    scr = SeededCacheReconstruct(data, [1.0], 0.01, StreamNoise(0))
    root = np.ones(data.d)
    assert scr.answer(root, 0).path == "cache_hit"


def test_scr_gamma_one_always_reconstructs(data):
    scr = SeededCacheReconstruct(data, [0.5, 0.5], 0.0, StreamNoise(0), gamma=1.0)
    paths = {scr.answer(q, i % 2).path
             for i, q in enumerate(workload("random_range", data.d, size=30, seed=0))}
    assert paths <= {"reconstruct", "cache_hit"}
    assert scr.ledger.spent == pytest.approx(1.0)


def test_scr_noise_free_reconstruction_is_exact():
    x = synthetic_data(12, 1000, seed=1)

    class Zero:
        def laplace(self, scale, key=None):
            return 0.0

    scr = SeededCacheReconstruct(x, [1.0], 0.0, Zero())
    q = np.random.default_rng(0).uniform(-1, 1, 12)
    assert scr.answer(q, 0).value == pytest.approx(q @ x.counts, abs=1e-6)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 5), st.integers(0, 10_000))
def test_scr_budget_monotone_in_added_analyst(k, seed):
    rng = np.random.default_rng(seed)
    d = 16
    x = synthetic_data(d, 10_000, seed=seed)
    per = [workload("random_range", d, size=int(rng.integers(5, 25)), seed=seed + i)
           for i in range(k)]
    per = [qs + qs[: int(rng.integers(0, len(qs)))] for qs in per]
    seq = interleave(per, p=float(rng.uniform()), seed=seed, d=d)
    shares = rng.dirichlet(np.ones(k))
    lam = float(shares.min() * 0.75 / 4)
    j = int(rng.integers(k))

    def remaining(s, sh):
        mech = SeededCacheReconstruct(x, sh, lam, KeyedNoise(seed), epsilon=1.0)
        for q, a in s:
            mech.answer(q, a)
        return mech

    full = remaining(seq, shares)
    rest = shares.copy()
    rest[j] = 0
    small = remaining(seq.without(j), rest)
    for i in range(k):
        if i != j:
            big_r = np.array(full.remaining_before(i))
            small_r = np.array(small.remaining_before(i))
            assert np.all(big_r >= small_r - 1e-12)


# -- wrappers and zoo -------------------------------------------------------------


def test_independent_wrapper_matches_solo_runs(data):
    per = [workload("random_range", data.d, size=30, seed=s) for s in range(3)]
    seq = interleave(per, 0.4, seed=9)
    shares = np.array([0.2, 0.3, 0.5])
    params = MechanismParams()
    joint = run_sequence("independent_pmw", data, seq, shares, 0.01, params, trial_seed=4)
    for i in range(3):
        only = np.zeros(3)
        only[i] = shares[i]
        sub = seq.for_analyst(i)
        solo = run_sequence("independent_pmw", data, sub, only, 0.01, params, trial_seed=4)
        mine = [a.value for a, who in zip(joint.answers, seq.analysts) if who == i]
        assert mine == [a.value for a in solo.answers]


@pytest.mark.parametrize("kind", MECHANISM_KINDS)
def test_every_kind_answers_everything(kind, data):
    per = [workload("random_range", data.d, size=20, seed=s) for s in range(2)]
    seq = interleave(per, 0.5, seed=1)
    shares = np.array([0.5, 0.5])
    params = resolve_params(MechanismParams(), shares, 0.01, data.n)
    out = run_sequence(kind, data, seq, shares, 0.01, params, trial_seed=2)
    assert len(out.answers) == len(seq)
    assert all(a is not None for a in out.answers)
    assert out.mechanism.ledger.spent <= 1.0 + 1e-12
    assert out.time_steps >= len(seq)


def test_unknown_kind(data):
    with pytest.raises(ValueError):
        build_mechanism("nope", data, [1.0], 0.01, MechanismParams())


# -- schedulers -----------------------------------------------------------------


@pytest.mark.parametrize("kind", ["round_robin", "randomized"])
def test_single_analyst_never_stalls(kind):
    seq = tagged_sequence([0] * 7, 1)
    _, state = scheduler_run(kind, Recorder(), seq, seed=0)
    assert state.time_steps == 7 and state.stall_count == 0


def test_round_robin_stalls_waiting_for_bob():
    seq = tagged_sequence([0, 0, 0, 1, 1, 1], 2)
    inner = Recorder()
    _, state = scheduler_run("round_robin", inner, seq)
    # step 1 answers Alice, step 2 stalls on Bob (nothing arrived yet); Alice
    # finishes at step 5 and Bob is served alone from then on
    assert [a for a, _ in inner.calls] == [0, 0, 1, 0, 1, 1]
    assert state.answered_at.tolist() == [1, 3, 5, 4, 6, 7]
    assert state.stall_count == 1
    assert state.time_steps == len(seq) + state.stall_count


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 3), min_size=1, max_size=40), st.integers(0, 100),
       st.sampled_from(["round_robin", "randomized"]))
def test_scheduler_preserves_order_per_analyst(analysts, seed, kind):
    seq = tagged_sequence(analysts, 4)
    inner = Recorder()
    answers, state = scheduler_run(kind, inner, seq, seed=seed)
    assert len(inner.calls) == len(seq)
    for i in range(4):
        got = [t for a, t in inner.calls if a == i]
        assert got == sorted(got)
    assert state.time_steps == len(seq) + state.stall_count
    assert sorted(state.order) == list(range(len(seq)))


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 8), st.integers(1, 20), st.integers(0, 1000))
def test_round_robin_fair_prefix(k, c, seed):
    per = [[np.full(2, i)] * c for i in range(k)]
    seq = interleave(per, p=1.0 / k if k > 1 else 1.0, seed=seed, d=2)
    inner = Recorder()
    scheduler_run("round_robin", inner, seq)
    counts = np.bincount([a for a, _ in inner.calls[: c * k]], minlength=k)
    assert np.all(counts == c)


def test_randomized_scheduler_respects_weights():
    seq = tagged_sequence([0, 1] * 200, 2)
    inner = Recorder()
    scheduler_run("randomized", inner, seq, weights=[0.9, 0.1], seed=3)
    first = [a for a, _ in inner.calls[:100]]
    assert first.count(0) > 80


def test_efficiency_thresholds():
    assert efficiency_threshold("uniform", 2, 1) == pytest.approx(2 * np.log(2))
    assert scheduler_efficiency_threshold("uniform", 2, 1) == 2
    assert efficiency_threshold("uniform", 10, 3) == pytest.approx(39.7065, abs=1e-3)
    assert efficiency_threshold("nonuniform", 10, 3, p=np.ones(10)) == pytest.approx(
        efficiency_threshold("uniform", 10, 3))
    assert efficiency_threshold("uniform", 2, 4) == pytest.approx(2 * np.log(2))
