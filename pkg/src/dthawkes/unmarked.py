"""Unmarked multivariate discrete Hawkes model with per-pair geometric
decay: constant backgrounds, no marks, recursion states indexed (l, m).

Tying all decay entries to a single value reproduces the marked model with
zero alarm excitation and a flat seasonal profile.
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from .core import BinnedSeries, UnmarkedParams
from .likelihood import LikelihoodError, LogLikValue
from .simulator import COUNT_CAP, SimulationError, substream


def _event_log_terms(series: BinnedSeries, lam: np.ndarray, ubins: np.ndarray) -> float:
    total = 0.0
    for m in range(series.dims):
        pos = np.searchsorted(ubins, series.bins[m])
        lam_m = lam[pos, m]
        if np.any(lam_m < 1e-300):
            raise LikelihoodError(f"vanishing intensity in dimension {m}")
        total += float(np.sum(series.counts[m] * np.log(lam_m)))
    return total


def _compensator(params: UnmarkedParams, series: BinnedSeries) -> float:
    N = series.n_bins
    total = N * float(params.mu.sum())
    for l in range(series.dims):
        if series.bins[l].size == 0:
            continue
        rem = N - series.bins[l]
        for m in range(series.dims):
            G = 1.0 - (1.0 - params.B[l, m]) ** rem
            total += params.K[l, m] * float(np.sum(series.counts[l] * G))
    return total


def u_loglik(
    params: UnmarkedParams, series: BinnedSeries, method: str = "recursive"
) -> LogLikValue:
    """Log-likelihood of the unmarked model.

    ``method`` picks the evaluation route: "naive" (grid sum), "event"
    (event form, direct-sum intensities) or "recursive" (event form,
    per-pair recursion).  All three agree to float precision.
    """
    ubins, cnt, _ = series.merged()
    if method == "naive":
        value = _kernels.unmarked_naive_grid_loglik(
            series.n_bins, ubins, cnt, params.mu, params.K, params.B
        )
        if not np.isfinite(value):
            raise LikelihoodError("vanishing intensity at an observed event bin")
        return LogLikValue(value=float(value), n_terms=series.n_bins * series.dims)
    if method == "event":
        lam = _kernels.unmarked_naive_event_intensities(ubins, cnt, params.mu, params.K, params.B)
    elif method == "recursive":
        lam = _kernels.unmarked_event_intensities(ubins, cnt, params.mu, params.K, params.B)
    else:
        raise ValueError(f"unknown method {method!r}")
    value = _event_log_terms(series, lam, ubins) - _compensator(params, series)
    return LogLikValue(value=value, n_terms=series.n_event_bins())


def u_grad(
    params: UnmarkedParams, series: BinnedSeries
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(d_mu, d_K, d_B) via the per-pair recursive relations."""
    ubins, cnt, _ = series.merged()
    d_mu, d_K, d_B, ok = _kernels.unmarked_recursive_gradient_event_part(
        ubins, cnt, params.mu, params.K, params.B
    )
    if not ok:
        raise LikelihoodError("vanishing intensity at an observed event bin")
    N = series.n_bins
    d_mu = d_mu - N
    for p in range(series.dims):
        if series.bins[p].size == 0:
            continue
        rem = N - series.bins[p]
        y = series.counts[p]
        for q in range(series.dims):
            b = params.B[p, q]
            G = 1.0 - (1.0 - b) ** rem
            dG = np.where(rem > 0, rem * (1.0 - b) ** np.maximum(rem - 1, 0), 0.0)
            d_K[p, q] -= float(np.sum(y * G))
            d_B[p, q] -= params.K[p, q] * float(np.sum(y * dG))
    return d_mu, d_K, d_B


def u_intensity_grid(params: UnmarkedParams, series: BinnedSeries) -> np.ndarray:
    """Intensity at every grid bin, shape (n_bins, M)."""
    ubins, cnt, _ = series.merged()
    return _kernels.unmarked_grid_intensities(
        series.n_bins, ubins, cnt, params.mu, params.K, params.B
    )


def u_simulate(
    params: UnmarkedParams, n_bins: int, seed: int, mode: str = "recursive"
) -> BinnedSeries:
    """Simulate the unmarked model; naive and recursive modes share the
    per-(bin, dimension) substreams, so seeded runs are bit-identical."""
    if mode not in ("naive", "recursive"):
        raise ValueError(f"unknown mode {mode!r}")
    M = params.dims
    counts_dense = np.zeros((n_bins, M), dtype=np.int64)
    R3 = np.zeros((M, M))
    for t in range(1, n_bins + 1):
        if mode == "recursive":
            if t > 1:
                R3 = (1.0 - params.B) * R3 + params.B * counts_dense[t - 2][:, None]
            lam_vec = params.mu + np.sum(params.K * R3, axis=0)
        else:
            lam_vec = params.mu.copy()
            for v in range(1, t):
                yv = counts_dense[v - 1]
                if not yv.any():
                    continue
                g = params.B * (1.0 - params.B) ** (t - v - 1)
                lam_vec += (yv[:, None] * params.K * g).sum(axis=0)
        for m in range(M):
            lam = float(lam_vec[m])
            if not np.isfinite(lam) or lam > COUNT_CAP:
                raise SimulationError(f"intensity {lam} past the count cap")
            counts_dense[t - 1, m] = substream(seed, t, m).poisson(lam)
    bins, counts, alarms = [], [], []
    for m in range(M):
        ts = np.nonzero(counts_dense[:, m])[0] + 1
        bins.append(ts.astype(np.int64))
        counts.append(counts_dense[ts - 1, m])
        alarms.append(np.zeros(ts.size, dtype=bool))
    return BinnedSeries(
        dims=M,
        n_bins=n_bins,
        bins=tuple(bins),
        counts=tuple(counts),
        alarms=tuple(alarms),
    )
