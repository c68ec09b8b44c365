"""Conditional intensity for the marked model: direct sums, the linear-time
merged-timeline recursion, and the per-source decomposition used by the
triggering reports.

The recursion state is advanced over the globally merged, sorted set of
distinct event bins.  An event bin never excites itself: the intensity at
bin t conditions on bins <= t - 1 only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import BinnedSeries, MarkedParams


@dataclass
class RecursionState:
    """Decayed excitation mass per source dimension.

    ``R[l]`` carries the non-alarm mass and ``R_a[l]`` the alarm mass, both
    valid for a query at bin ``cursor`` (i.e. summing events <= cursor - 1).
    """

    R: np.ndarray
    R_a: np.ndarray
    cursor: int

    @classmethod
    def initial(cls, dims: int, cursor: int = 1) -> "RecursionState":
        return cls(R=np.zeros(dims), R_a=np.zeros(dims), cursor=cursor)


@dataclass(frozen=True)
class IntensityDecomposition:
    background: float
    nonalarm_self: float
    nonalarm_cross: float
    alarm_self: float
    alarm_cross: float

    @property
    def total(self) -> float:
        return (
            self.background
            + self.nonalarm_self
            + self.nonalarm_cross
            + self.alarm_self
            + self.alarm_cross
        )


def _check_bin(series: BinnedSeries, t: int) -> None:
    if not (1 <= t <= series.n_bins):
        raise IndexError(f"bin {t} outside [1, {series.n_bins}]")


def intensity_naive(params: MarkedParams, series: BinnedSeries, t: int, m: int) -> float:
    """Intensity at bin t in dimension m by direct summation over all
    strictly earlier events."""
    _check_bin(series, t)
    lam = params.mu[m] * params.season.at_hour(series.hour_at(t))
    beta = params.beta
    for l in range(series.dims):
        sel = series.bins[l] < t
        if not np.any(sel):
            continue
        gaps = t - series.bins[l][sel] - 1
        f = params.K[l, m] + params.alpha[l, m] * series.alarms[l][sel]
        lam += float(np.sum(series.counts[l][sel] * f * beta * (1.0 - beta) ** gaps))
    return lam


def advance_state(
    state: RecursionState,
    from_bin: int,
    to_bin: int,
    counts_at_u: np.ndarray,
    alarms_at_u: np.ndarray,
    beta: float,
) -> RecursionState:
    """Move the state from a query at ``from_bin`` to one at ``to_bin``,
    folding in the events that occurred at ``from_bin``."""
    if to_bin <= from_bin:
        raise ValueError(f"bins must advance: {from_bin} -> {to_bin}")
    gap = to_bin - from_bin
    dec = (1.0 - beta) ** gap
    kick = beta * (1.0 - beta) ** (gap - 1)
    counts = np.asarray(counts_at_u, dtype=float)
    alarmed = counts * np.asarray(alarms_at_u, dtype=bool)
    return RecursionState(
        R=dec * state.R + counts * kick,
        R_a=dec * state.R_a + alarmed * kick,
        cursor=to_bin,
    )


def event_intensity_matrix(
    params: MarkedParams, series: BinnedSeries
) -> tuple[np.ndarray, np.ndarray]:
    """Intensity at every distinct event bin in one merged recursion pass.

    Returns (ubins, lam) with lam of shape (len(ubins), M); cost
    O(M^2 * number of event bins).
    """
    ubins, cnt, alm = series.merged()
    if ubins.size == 0:
        return ubins, np.zeros((0, series.dims))
    s_ev = params.season.values[series.hours_at(ubins) - 1]
    lam = _kernels.marked_event_intensities(
        ubins, cnt, alm, s_ev, params.mu, params.K, params.alpha, params.beta
    )
    return ubins, lam


def intensities_at_events(
    params: MarkedParams, series: BinnedSeries
) -> dict[tuple[int, int], float]:
    """Intensity at every event bin of every dimension, keyed (dimension, bin)."""
    ubins, lam = event_intensity_matrix(params, series)
    out: dict[tuple[int, int], float] = {}
    for m in range(series.dims):
        pos = np.searchsorted(ubins, series.bins[m])
        for j, t in zip(pos, series.bins[m]):
            out[(m, int(t))] = float(lam[j, m])
    return out


def decompose(
    params: MarkedParams, series: BinnedSeries, t: int, m: int
) -> IntensityDecomposition:
    """Split the intensity at (t, m) into background, non-alarm self/cross
    and alarm self/cross excitation."""
    _check_bin(series, t)
    bg = params.mu[m] * params.season.at_hour(series.hour_at(t))
    beta = params.beta
    parts = np.zeros(4)  # nonalarm_self, nonalarm_cross, alarm_self, alarm_cross
    for l in range(series.dims):
        sel = series.bins[l] < t
        if not np.any(sel):
            continue
        g = beta * (1.0 - beta) ** (t - series.bins[l][sel] - 1)
        y = series.counts[l][sel]
        alarmed = series.alarms[l][sel]
        non = float(np.sum(y * params.K[l, m] * g))
        alr = float(np.sum(y * alarmed * params.alpha[l, m] * g))
        if l == m:
            parts[0] += non
            parts[2] += alr
        else:
            parts[1] += non
            parts[3] += alr
    return IntensityDecomposition(
        background=bg,
        nonalarm_self=parts[0],
        nonalarm_cross=parts[1],
        alarm_self=parts[2],
        alarm_cross=parts[3],
    )


def intensity_grid(params: MarkedParams, series: BinnedSeries) -> np.ndarray:
    """Intensity at every bin of the grid, shape (n_bins, M), via the
    per-bin recursion (used by the predictive scorer and simulators)."""
    ubins, cnt, alm = series.merged()
    s_grid = params.season.values[series.hours_at(np.arange(1, series.n_bins + 1)) - 1]
    return _kernels.marked_grid_intensities(
        series.n_bins, ubins, cnt, alm, s_grid, params.mu, params.K, params.alpha, params.beta
    )
