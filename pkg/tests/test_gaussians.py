"""Gaussian tail surface: accuracy against mpmath, sandwich bounds, inversion."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from remclock.gaussians import (gaussian_tail, hazard, log_gaussian_tail,
                                log_phi, tail_inverse_log, tail_series)

from oracles import log_tail_mp, tail_mp


def test_tail_at_zero_is_half():
    assert gaussian_tail(0.0) == 0.5


def test_tail_at_one_matches_oracle():
    assert gaussian_tail(1.0) == pytest.approx(tail_mp(1.0), rel=1e-13)
    assert gaussian_tail(1.0) == pytest.approx(0.158655, abs=5e-7)


def test_relative_accuracy_over_working_range():
    # linear space wherever the value is representable in float64
    xs = np.concatenate([np.linspace(-40, 37.5, 401), [-1e-3, 1e-3, 7.999, 8.001]])
    got = gaussian_tail(xs)
    want = np.array([tail_mp(x) for x in xs])
    rel = np.abs(got - want) / want
    assert rel.max() <= 1e-13
    # beyond that the value underflows; the log surface carries accuracy to 40
    deep = np.linspace(37.5, 40.0, 20)
    got_log = log_gaussian_tail(deep)
    want_log = np.array([log_tail_mp(x) for x in deep])
    assert np.max(np.abs(got_log / want_log - 1.0)) <= 1e-13


def test_sandwich_bounds_on_positive_axis():
    xs = np.geomspace(1e-2, 40.0, 200)
    phi = np.exp(log_phi(xs))
    lower = (1.0 / xs) * (1.0 - xs ** -2) * phi
    upper = (1.0 / xs) * phi
    tail = gaussian_tail(xs)
    assert np.all(tail <= upper)
    # the lower bound is vacuous (negative) below x=1
    mask = xs > 1.0
    assert np.all(tail[mask] >= lower[mask])


def test_x3_strictly_inside_sandwich():
    x = 3.0
    phi = math.exp(float(log_phi(x)))
    t = float(gaussian_tail(x))
    assert (1 / x) * (1 - x ** -2) * phi < t < (1 / x) * phi


def test_log_tail_deep_values():
    for x in (10.0, 50.0, 200.0, 1000.0):
        assert float(log_gaussian_tail(x)) == pytest.approx(log_tail_mp(x), rel=1e-12)


def test_log_tail_consistent_with_linear():
    xs = np.linspace(-8, 8, 161)
    assert np.allclose(np.exp(log_gaussian_tail(xs)), gaussian_tail(xs), rtol=1e-13)


def test_tail_series_matches_deep_tail():
    # asymptotic series with 6 terms: truncation below the first omitted
    # term 11!!/x^12, so the allowed error shrinks rapidly with x
    for x in (9.0, 12.0, 20.0, 30.0):
        got = float(tail_series(np.array([x]))[0])
        want = tail_mp(x)
        envelope = 10395.0 / x ** 12
        assert abs(got / want - 1.0) <= 1.1 * envelope


def test_inverse_round_trip():
    xs = np.concatenate([np.linspace(-5, 8, 80), [20.0, 100.0, 500.0]])
    back = tail_inverse_log(log_gaussian_tail(xs))
    assert np.allclose(back, xs, rtol=1e-10, atol=1e-12)


def test_hazard_positive_and_monotone():
    xs = np.linspace(-10, 40, 300)
    h = hazard(xs)
    assert np.all(h > 0)
    assert np.all(np.diff(h) > 0)


@given(st.floats(min_value=-35, max_value=35))
@settings(deadline=None, max_examples=200)
def test_symmetry(x):
    assert gaussian_tail(x) + gaussian_tail(-x) == pytest.approx(1.0, abs=1e-14)


@given(st.floats(min_value=-38, max_value=38), st.floats(min_value=1e-6, max_value=2.0))
@settings(deadline=None, max_examples=200)
def test_strictly_decreasing(x, dx):
    assert float(log_gaussian_tail(x + dx)) < float(log_gaussian_tail(x))
