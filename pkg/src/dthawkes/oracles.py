"""Brute-force reference implementations for verification only.

Everything here is written as the most literal possible summation, shares
no code with the production engines, and is capped to small instances.
Production code must never import this module.
"""

from __future__ import annotations

import math

import numpy as np

from .core import BinnedSeries, MarkedParams

MAX_DIMS = 3
MAX_BINS = 1000


def _check_size(series: BinnedSeries) -> None:
    if series.dims > MAX_DIMS or series.n_bins > MAX_BINS:
        raise ValueError(
            f"oracle instances are capped at M <= {MAX_DIMS}, N <= {MAX_BINS}"
        )


def oracle_intensity(params: MarkedParams, series: BinnedSeries, t: int, m: int) -> float:
    """Literal evaluation of the defining intensity sum."""
    _check_size(series)
    s = params.season.at_hour(series.hour_at(t))
    lam = params.mu[m] * s
    for l in range(series.dims):
        for t_i, y, alarmed in zip(series.bins[l], series.counts[l], series.alarms[l]):
            if t_i <= t - 1:
                f = params.K[l, m] + (params.alpha[l, m] if alarmed else 0.0)
                lam += y * f * params.beta * (1.0 - params.beta) ** (t - t_i - 1)
    return lam


def oracle_loglik(params: MarkedParams, series: BinnedSeries) -> float:
    """Grid sum of y*log(lambda) - lambda over every bin and dimension."""
    _check_size(series)
    total = 0.0
    for t in range(1, series.n_bins + 1):
        for m in range(series.dims):
            lam = oracle_intensity(params, series, t, m)
            y = series.count_at(m, t)
            if y > 0:
                total += y * math.log(lam)
            total -= lam
    return total


def oracle_grad_fd(
    params: MarkedParams, series: BinnedSeries, step: float = 1e-6
) -> dict[str, np.ndarray | float]:
    """Central finite differences of oracle_loglik in every coordinate."""
    _check_size(series)
    M = series.dims

    def rebuilt(mu, K, alpha, beta):
        return MarkedParams(mu=mu, K=K, alpha=alpha, beta=beta, season=params.season)

    def diff(plus: MarkedParams, minus: MarkedParams) -> float:
        return (oracle_loglik(plus, series) - oracle_loglik(minus, series)) / (2 * step)

    d_mu = np.zeros(M)
    for p in range(M):
        e = np.zeros(M)
        e[p] = step
        d_mu[p] = diff(
            rebuilt(params.mu + e, params.K, params.alpha, params.beta),
            rebuilt(params.mu - e, params.K, params.alpha, params.beta),
        )
    d_K = np.zeros((M, M))
    d_alpha = np.zeros((M, M))
    for p in range(M):
        for q in range(M):
            e = np.zeros((M, M))
            e[p, q] = step
            d_K[p, q] = diff(
                rebuilt(params.mu, params.K + e, params.alpha, params.beta),
                rebuilt(params.mu, np.maximum(params.K - e, 0.0), params.alpha, params.beta),
            )
            d_alpha[p, q] = diff(
                rebuilt(params.mu, params.K, params.alpha + e, params.beta),
                rebuilt(params.mu, params.K, np.maximum(params.alpha - e, 0.0), params.beta),
            )
    d_beta = diff(
        rebuilt(params.mu, params.K, params.alpha, params.beta + step),
        rebuilt(params.mu, params.K, params.alpha, params.beta - step),
    )
    return {"d_mu": d_mu, "d_K": d_K, "d_alpha": d_alpha, "d_beta": d_beta}


def oracle_branching_mean(
    mu: np.ndarray, K: np.ndarray, alpha: np.ndarray, p_alarm: float, s_bar: float = 1.0
) -> np.ndarray:
    """Stationary mean events per bin: (I - (K + p*alpha)^T)^-1 (mu * s_bar)."""
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    M = mu.shape[0]
    branching = np.asarray(K, dtype=float) + p_alarm * np.asarray(alpha, dtype=float)
    return np.linalg.solve(np.eye(M) - branching.T, mu * s_bar)


def oracle_histogram(values, edges) -> np.ndarray:
    """Counting histogram: values v land in bucket i iff edges[i] <= v < edges[i+1]."""
    counts = np.zeros(len(edges) - 1, dtype=np.int64)
    for v in values:
        for i in range(len(edges) - 1):
            if edges[i] <= v < edges[i + 1]:
                counts[i] += 1
                break
    return counts
