import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from madp.coupon import (
    CouponSpec,
    DomainTooSmall,
    expected_draws,
    monte_carlo_draws,
    nonuniform_upper_bound,
    partial_exp_sum,
    uniform_closed_form,
)


def harmonic(k):
    return sum(1.0 / j for j in range(1, k + 1))


@pytest.mark.parametrize("m,t,expected", [(1, 7.3, 1.0), (2, 3.0, 4.0), (3, 2.0, 5.0)])
def test_partial_exp_sum(m, t, expected):
    assert partial_exp_sum(m, t) == pytest.approx(expected)


def test_expected_draws_examples():
    assert expected_draws(CouponSpec.uniform(1)) == pytest.approx(1.0, rel=1e-6)
    assert expected_draws(CouponSpec.uniform(2)) == pytest.approx(3.0, rel=1e-6)
    assert expected_draws(CouponSpec.uniform(5)) == pytest.approx(137 / 12, rel=1e-4)


def test_expected_draws_two_copies_of_two_types():
    # E = 2 * int_0^inf 1 - (1 - e^-t (1 + t))^2 dt = 11/2
    assert expected_draws(CouponSpec.uniform(2, 2)) == pytest.approx(5.5, rel=1e-6)


def test_weights_are_scale_free():
    a = expected_draws(CouponSpec((1, 2, 1), (1.0, 2.0, 3.0)))
    b = expected_draws(CouponSpec((1, 2, 1), (2.0, 4.0, 6.0)))
    assert a == pytest.approx(b, rel=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(1, 4), min_size=1, max_size=6), st.integers(0, 10_000))
def test_expected_draws_at_least_total_quota(m, seed):
    p = np.random.default_rng(seed).uniform(0.2, 3.0, size=len(m))
    assert expected_draws(CouponSpec(m, p)) >= sum(m) - 1e-9


def test_closed_form_examples():
    assert uniform_closed_form(10, 1) == pytest.approx(23.026, abs=1e-3)
    assert uniform_closed_form(10, 3) == pytest.approx(39.71, abs=1e-2)
    r = uniform_closed_form(100, 1) / expected_draws(CouponSpec.uniform(100))
    assert 0.85 < r < 1.0
    with pytest.raises(DomainTooSmall):
        uniform_closed_form(2, 1)


def test_exact_exceeds_asymptotic_for_single_copies():
    for k in (10, 25, 60, 200):
        assert expected_draws(CouponSpec.uniform(k)) > uniform_closed_form(k, 1)


def test_upper_bound_examples():
    spec = CouponSpec((1,) * 10, (2.0,) + (1.0,) * 9)
    assert nonuniform_upper_bound(spec) == pytest.approx(46.05, abs=1e-2)
    doubled = CouponSpec(spec.m, tuple(2 * v for v in spec.p))
    assert nonuniform_upper_bound(doubled) == nonuniform_upper_bound(spec)
    uni = CouponSpec((1, 3, 2), (1.0, 1.0, 1.0))
    assert nonuniform_upper_bound(uni) == pytest.approx(uniform_closed_form(3, 3))
    with pytest.raises(DomainTooSmall):
        nonuniform_upper_bound(CouponSpec.uniform(2))


def test_monte_carlo_examples():
    assert monte_carlo_draws(CouponSpec.uniform(1), 100) == (1.0, 0.0)
    for k, target in ((2, 3.0), (6, 14.7)):
        mean, se = monte_carlo_draws(CouponSpec.uniform(k), 100_000, seed=k)
        assert abs(mean - target) <= 3 * se


def test_monte_carlo_is_seeded():
    spec = CouponSpec((2, 1), (1.0, 3.0))
    assert monte_carlo_draws(spec, 500, seed=4) == monte_carlo_draws(spec, 500, seed=4)


def test_spec_validation():
    with pytest.raises(ValueError):
        CouponSpec((1, 0), (1.0, 1.0))
    with pytest.raises(ValueError):
        CouponSpec((1,), (1.0, 1.0))
    with pytest.raises(ValueError):
        CouponSpec((1,), (0.0,))
