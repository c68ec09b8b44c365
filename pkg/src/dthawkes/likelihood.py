"""Log-likelihood evaluators for the marked model.

Three algebraically equivalent routes: the literal grid sum, the event
form (event log terms plus geometric-CDF compensators) and the recursive
form whose intensities come from the merged-timeline recursion.  All omit
the constant -log(y!) Poisson term; the predictive scorer adds it back.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import BinnedSeries, MarkedParams, pow1m
from .intensity import event_intensity_matrix


class LikelihoodError(ValueError):
    """Raised when an intensity vanishes at an observed event bin."""


@dataclass(frozen=True)
class LogLikValue:
    value: float
    n_terms: int


def ridge_penalty(params: MarkedParams) -> float:
    """Off-diagonal K plus full alpha, squared: the shrinkage target."""
    off = params.K - np.diag(np.diag(params.K))
    return float(np.sum(off**2) + np.sum(params.alpha**2))


def _event_terms_and_compensator(
    params: MarkedParams, series: BinnedSeries, ubins: np.ndarray, lam: np.ndarray
) -> float:
    beta = params.beta
    N = series.n_bins
    total = 0.0
    for m in range(series.dims):
        if series.bins[m].size == 0:
            continue
        pos = np.searchsorted(ubins, series.bins[m])
        lam_m = lam[pos, m]
        if np.any(lam_m < 1e-300):
            raise LikelihoodError(f"vanishing intensity at an event bin of dimension {m}")
        total += float(np.sum(series.counts[m] * np.log(lam_m)))
    # excitation compensator: per source dimension, summed over targets
    k_colsum = params.K.sum(axis=1)
    a_colsum = params.alpha.sum(axis=1)
    for l in range(series.dims):
        if series.bins[l].size == 0:
            continue
        G = 1.0 - pow1m(beta, N - series.bins[l])
        total -= k_colsum[l] * float(np.sum(series.counts[l] * G))
        alarmed = series.alarms[l]
        if np.any(alarmed):
            total -= a_colsum[l] * float(np.sum(series.counts[l][alarmed] * G[alarmed]))
    # background compensator
    total -= float(params.mu.sum()) * series.seasonal_grid_sum(params.season)
    return total


def loglik_naive(params: MarkedParams, series: BinnedSeries) -> LogLikValue:
    """Grid sum of Y log(lambda) - lambda with direct-sum intensities.

    Cost grows with n_bins * event bins; use the recursive evaluator for
    anything large.
    """
    ubins, cnt, alm = series.merged()
    s_grid = params.season.values[series.hours_at(np.arange(1, series.n_bins + 1)) - 1]
    value = _kernels.marked_naive_grid_loglik(
        series.n_bins, ubins, cnt, alm, s_grid, params.mu, params.K, params.alpha, params.beta
    )
    if not np.isfinite(value):
        raise LikelihoodError("vanishing intensity at an observed event bin")
    return LogLikValue(value=float(value), n_terms=series.n_bins * series.dims)


def loglik_event_form(params: MarkedParams, series: BinnedSeries) -> LogLikValue:
    """Event form: event log terms (direct-sum intensities) minus the
    geometric-CDF excitation compensators and the background compensator."""
    ubins, cnt, alm = series.merged()
    if ubins.size:
        s_ev = params.season.values[series.hours_at(ubins) - 1]
        lam = _kernels.marked_naive_event_intensities(
            ubins, cnt, alm, s_ev, params.mu, params.K, params.alpha, params.beta
        )
    else:
        lam = np.zeros((0, series.dims))
    value = _event_terms_and_compensator(params, series, ubins, lam)
    return LogLikValue(value=value, n_terms=series.n_event_bins())


def loglik_recursive(params: MarkedParams, series: BinnedSeries) -> LogLikValue:
    """Event form with intensities from the linear-time recursion."""
    ubins, lam = event_intensity_matrix(params, series)
    value = _event_terms_and_compensator(params, series, ubins, lam)
    return LogLikValue(value=value, n_terms=series.n_event_bins())


def loglik_regularized(
    params: MarkedParams, series: BinnedSeries, lambda_h: float, penalty_sign: str = "shrink"
) -> float:
    """Ridge-regularized objective.

    The penalty is subtracted so that maximization shrinks the off-diagonal
    K and alpha entries; ``penalty_sign="paper"`` flips it to the printed
    addition for auditing.
    """
    if lambda_h < 0:
        raise ValueError("lambda_h must be >= 0")
    if penalty_sign not in ("shrink", "paper"):
        raise ValueError(f"unknown penalty_sign {penalty_sign!r}")
    sign = -1.0 if penalty_sign == "shrink" else 1.0
    return loglik_recursive(params, series).value + sign * lambda_h * ridge_penalty(params)
