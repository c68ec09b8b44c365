import math

import numpy as np
import pytest

from dthawkes import (
    BinnedSeries,
    MarkedParams,
    SeasonalProfile,
    loglik_event_form,
    loglik_naive,
    loglik_recursive,
    loglik_regularized,
    ridge_penalty,
)
from dthawkes.likelihood import LikelihoodError
from dthawkes.oracles import oracle_loglik

from conftest import random_params, sparse_series

HAND_VALUE = 2 * math.log(0.1) - 0.1 - 1.1 + math.log(0.6) - 0.6  # -6.915996


def hand_instance():
    params = MarkedParams(mu=[0.1], K=[[1.0]], alpha=[[0.0]], beta=0.5)
    series = BinnedSeries(
        dims=1,
        n_bins=3,
        bins=(np.array([1, 3]),),
        counts=(np.array([2, 1]),),
        alarms=(np.array([False, False]),),
    )
    return params, series


@pytest.mark.parametrize("evaluator", [loglik_naive, loglik_event_form, loglik_recursive])
def test_hand_value(evaluator):
    params, series = hand_instance()
    assert evaluator(params, series).value == pytest.approx(-6.915996, abs=1e-6)
    assert evaluator(params, series).value == pytest.approx(HAND_VALUE, abs=1e-12)


def test_hand_value_matches_oracle():
    params, series = hand_instance()
    assert oracle_loglik(params, series) == pytest.approx(HAND_VALUE, abs=1e-12)


def test_zero_events_is_background_compensator():
    params = MarkedParams(mu=[0.1], K=[[0.5]], alpha=[[0.1]], beta=0.5)
    empty = BinnedSeries(
        dims=1,
        n_bins=10,
        bins=(np.array([], dtype=int),),
        counts=(np.array([], dtype=int),),
        alarms=(np.array([], dtype=bool),),
    )
    for ev in (loglik_naive, loglik_event_form, loglik_recursive):
        assert ev(params, empty).value == pytest.approx(-1.0, rel=1e-12)


def test_three_way_identity_random(rng):
    worst = 0.0
    for i in range(40):
        M = int(rng.integers(1, 4))
        N = int(rng.integers(5, 300))
        params = random_params(rng, M)
        series = sparse_series(rng, M, N)
        a = loglik_naive(params, series).value
        b = loglik_event_form(params, series).value
        c = loglik_recursive(params, series).value
        scale = max(1.0, abs(a))
        worst = max(worst, abs(a - b) / scale, abs(a - c) / scale)
    assert worst <= 1e-9


def test_matches_oracle_random(rng):
    for _ in range(10):
        M = int(rng.integers(1, 4))
        params = random_params(rng, M)
        series = sparse_series(rng, M, 80)
        got = loglik_recursive(params, series).value
        assert got == pytest.approx(oracle_loglik(params, series), rel=1e-10)


def test_single_event_at_first_bin(rng):
    params = random_params(rng, 1)
    series = BinnedSeries(
        dims=1,
        n_bins=20,
        bins=(np.array([1]),),
        counts=(np.array([1]),),
        alarms=(np.array([True]),),
    )
    assert loglik_recursive(params, series).value == pytest.approx(
        loglik_event_form(params, series).value, rel=1e-14
    )


def test_vanishing_intensity_raises():
    # background small enough to underflow the log guard at an event bin
    params = MarkedParams(mu=[1e-310], K=[[0.0]], alpha=[[0.0]], beta=0.5)
    series = BinnedSeries(
        dims=1,
        n_bins=3,
        bins=(np.array([2]),),
        counts=(np.array([1]),),
        alarms=(np.array([False]),),
    )
    with pytest.raises(LikelihoodError):
        loglik_recursive(params, series)
    with pytest.raises(LikelihoodError):
        loglik_naive(params, series)


# -- ridge penalty and regularized objective -----------------------------


def test_ridge_penalty_diagonal_is_zero():
    params = MarkedParams(
        mu=[0.1, 0.1], K=np.diag([0.3, 0.4]), alpha=np.zeros((2, 2)), beta=0.5
    )
    assert ridge_penalty(params) == 0.0


def test_ridge_penalty_hand_sum():
    K = np.array([[0.5, 0.1], [0.1, 0.5]])
    alpha = np.full((2, 2), 0.2)
    params = MarkedParams(mu=[0.1, 0.1], K=K, alpha=alpha, beta=0.5)
    assert ridge_penalty(params) == pytest.approx(0.02 + 0.16, rel=1e-12)


def test_ridge_penalty_matches_double_loop(rng):
    params = random_params(rng, 3)
    expected = 0.0
    for l in range(3):
        for m in range(3):
            if l != m:
                expected += params.K[l, m] ** 2
            expected += params.alpha[l, m] ** 2
    assert ridge_penalty(params) == pytest.approx(expected, rel=1e-12)


def test_regularized_objective(rng):
    params = random_params(rng, 2)
    series = sparse_series(rng, 2, 100)
    base = loglik_recursive(params, series).value
    assert loglik_regularized(params, series, 0.0) == pytest.approx(base, rel=1e-14)
    p = ridge_penalty(params)
    assert loglik_regularized(params, series, 2.0) == pytest.approx(base - 2.0 * p, rel=1e-12)
    # the audit flag reproduces the printed addition instead
    assert loglik_regularized(params, series, 2.0, penalty_sign="paper") == pytest.approx(
        base + 2.0 * p, rel=1e-12
    )


def test_regularized_monotone_in_lambda(rng):
    params = random_params(rng, 2)
    series = sparse_series(rng, 2, 100)
    values = [loglik_regularized(params, series, lh) for lh in (0.0, 0.5, 1.0, 5.0)]
    assert all(a >= b for a, b in zip(values, values[1:]))


def test_regularized_validation(rng):
    params = random_params(rng, 1)
    series = sparse_series(rng, 1, 10)
    with pytest.raises(ValueError):
        loglik_regularized(params, series, -1.0)
    with pytest.raises(ValueError):
        loglik_regularized(params, series, 1.0, penalty_sign="bogus")


def test_alarm_free_seasonality_free_matches_unmarked(rng):
    from dthawkes import UnmarkedParams, u_loglik

    M = 2
    params = MarkedParams(
        mu=rng.uniform(0.05, 0.3, M),
        K=rng.uniform(0.0, 0.2, (M, M)),
        alpha=np.zeros((M, M)),
        beta=0.35,
    )
    series = sparse_series(rng, M, 150)
    tied = UnmarkedParams(mu=params.mu, K=params.K, B=np.full((M, M), params.beta))
    assert loglik_recursive(params, series).value == pytest.approx(
        u_loglik(tied, series).value, rel=1e-12
    )
