"""Out-of-sample evaluation: sequential predictive log-likelihood,
triggering-probability decomposition, interarrival-distribution check and
simulation-based count forecasts.

Predictive scores include the -log(y!) Poisson constant, so they are
proper log-probabilities; the training objectives omit it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .core import BinnedSeries, MarkedParams
from .intensity import intensity_grid
from .simulator import COUNT_CAP, SimConfig, SimulationError, simulate_recursive, substream


@dataclass(frozen=True)
class PredictiveScore:
    per_ward: np.ndarray
    overall: float
    n_test_bins: int


@dataclass(frozen=True)
class TriggeringReport:
    """Count-weighted average attribution of event-bin intensity.

    The three top-level shares sum to 1; each excitation share equals its
    self plus cross split.  ``per_event`` holds the event-order time series
    of the five proportions for plotting, one row per event bin.
    """

    avg_background: float
    avg_nonalarm: float
    avg_alarm: float
    nonalarm_self: float
    nonalarm_cross: float
    alarm_self: float
    alarm_cross: float
    per_event: np.ndarray  # columns: dim, bin, bg, na_self, na_cross, a_self, a_cross


@dataclass(frozen=True)
class ForecastResult:
    totals: np.ndarray  # (n_sims, M) simulated per-ward event totals
    mean: np.ndarray
    lower95: np.ndarray
    upper95: np.ndarray
    horizon_bins: int


@dataclass(frozen=True)
class InterarrivalHistogram:
    edges_hours: np.ndarray  # bucket left edges, width bin_hours
    mean_props: np.ndarray
    band2sd: np.ndarray  # two standard deviations across simulations
    observed_props: np.ndarray
    n_sims: int


def _check_follows(history: BinnedSeries, test: BinnedSeries) -> None:
    if (
        test.dims != history.dims
        or test.bin_minutes != history.bin_minutes
        or test.start_bin != history.start_bin + history.n_bins
    ):
        raise ValueError("test series does not immediately follow the history grid")


def predictive_loglik(
    params: MarkedParams, history: BinnedSeries, test: BinnedSeries
) -> PredictiveScore:
    """Log-probability of the test bins, each conditioned on the history and
    all earlier test bins, with parameters frozen."""
    _check_follows(history, test)
    M = history.dims
    if test.n_bins == 0:
        return PredictiveScore(per_ward=np.zeros(M), overall=0.0, n_test_bins=0)
    concat = history.concat(test)
    lam = intensity_grid(params, concat)[history.n_bins :, :]
    y = np.zeros((test.n_bins, M))
    for m in range(M):
        y[test.bins[m] - 1, m] = test.counts[m]
    per_ward = np.sum(y * np.log(lam) - lam - gammaln(y + 1.0), axis=0)
    return PredictiveScore(
        per_ward=per_ward, overall=float(per_ward.sum()), n_test_bins=test.n_bins
    )


def poisson_loglik_full(params: MarkedParams, series: BinnedSeries) -> float:
    """Factorial-inclusive log-likelihood over a whole series; the sequential
    predictive score telescopes against this quantity."""
    lam = intensity_grid(params, series)
    y = np.zeros((series.n_bins, series.dims))
    for m in range(series.dims):
        y[series.bins[m] - 1, m] = series.counts[m]
    return float(np.sum(y * np.log(lam) - lam - gammaln(y + 1.0)))


def triggering_report(params: MarkedParams, series: BinnedSeries) -> TriggeringReport:
    """Attribute each event bin's intensity to background, non-alarm and
    alarm excitation (self/cross), then average weighted by event counts."""
    ubins, cnt, alm = series.merged()
    if ubins.size == 0:
        raise ValueError("series has no events")
    M = series.dims
    beta = params.beta
    s_ev = params.season.values[series.hours_at(ubins) - 1]
    R = np.zeros(M)
    Ra = np.zeros(M)
    rows = []
    for k in range(ubins.size):
        for m in range(M):
            ym = cnt[k, m]
            if ym == 0:
                continue
            bg = params.mu[m] * s_ev[k]
            na = params.K[:, m] * R
            al = params.alpha[:, m] * Ra
            comp = np.array(
                [
                    bg,
                    na[m],
                    na.sum() - na[m],
                    al[m],
                    al.sum() - al[m],
                ]
            )
            rows.append((m, int(ubins[k]), ym, comp / comp.sum()))
        if k + 1 < ubins.size:
            gap = ubins[k + 1] - ubins[k]
            dec = (1.0 - beta) ** gap
            kick = beta * (1.0 - beta) ** (gap - 1)
            R = dec * R + cnt[k] * kick
            Ra = dec * Ra + cnt[k] * alm[k] * kick
    weights = np.array([r[2] for r in rows], dtype=float)
    props = np.stack([r[3] for r in rows])
    avg = (weights[:, None] * props).sum(axis=0) / weights.sum()
    per_event = np.column_stack(
        [[r[0] for r in rows], [r[1] for r in rows], props]
    )
    return TriggeringReport(
        avg_background=float(avg[0]),
        avg_nonalarm=float(avg[1] + avg[2]),
        avg_alarm=float(avg[3] + avg[4]),
        nonalarm_self=float(avg[1]),
        nonalarm_cross=float(avg[2]),
        alarm_self=float(avg[3]),
        alarm_cross=float(avg[4]),
        per_event=per_event,
    )


def forecast(
    params: MarkedParams,
    history: BinnedSeries,
    horizon_bins: int,
    n_sims: int,
    p_alarm: float,
    seed: int = 0,
) -> ForecastResult:
    """Empirical per-ward distribution of total counts over the horizon from
    conditional simulations (one independent substream per replication)."""
    if n_sims < 1:
        raise ValueError("n_sims must be >= 1")
    M = history.dims
    totals = np.zeros((n_sims, M), dtype=np.int64)
    for r in range(n_sims):
        cfg = SimConfig(
            n_bins=horizon_bins,
            p_alarm=p_alarm,
            seed=seed,
            params=params,
            history=history,
            stream=r + 1,
        )
        sim = simulate_recursive(cfg)
        totals[r] = [sim.counts[m].sum() for m in range(M)]
    return ForecastResult(
        totals=totals,
        mean=totals.mean(axis=0),
        lower95=np.percentile(totals, 2.5, axis=0),
        upper95=np.percentile(totals, 97.5, axis=0),
        horizon_bins=horizon_bins,
    )


def _next_arrival_gap(
    params: MarkedParams,
    p_alarm: float,
    R3: np.ndarray,
    R3a: np.ndarray,
    start_global: int,
    grid: BinnedSeries,
    seed: int,
    stream: int,
    max_bins: int,
) -> int:
    """Bins until the first simulated arrival in any ward, starting from the
    primed recursion state valid for a query at ``start_global``."""
    R3 = R3.copy()
    R3a = R3a.copy()
    M = params.dims
    g = start_global
    for step in range(1, max_bins + 1):
        h = (grid.origin_hour + (g - 1) * grid.bin_minutes // 60) % 24 + 1
        lam_vec = params.mu * params.season.at_hour(h) + R3 @ params.K + R3a @ params.alpha
        y = np.zeros(M)
        ya = np.zeros(M)
        arrived = False
        for m in range(M):
            lam = float(lam_vec[m])
            if not np.isfinite(lam) or lam > COUNT_CAP:
                raise SimulationError("intensity past the count cap")
            gen = substream(seed, g, m, stream)
            y[m] = gen.poisson(lam)
            if y[m] > 0:
                arrived = True
                ya[m] = y[m] if gen.random() < p_alarm else 0
        if arrived:
            return step
        R3 = (1.0 - params.beta) * R3 + y * params.beta
        R3a = (1.0 - params.beta) * R3a + ya * params.beta
        g += 1
    raise SimulationError(f"no simulated arrival within {max_bins} bins")


def interarrival_check(
    params: MarkedParams,
    test: BinnedSeries,
    n_sims: int,
    bin_hours: float,
    history: BinnedSeries | None = None,
    p_alarm: float = 0.0,
    seed: int = 0,
    horizon_days: float = 30.0,
) -> InterarrivalHistogram:
    """Compare observed pooled interarrival times on the test set against
    ``n_sims`` conditional simulations run from each test event until the
    next simulated arrival (any ward)."""
    if n_sims < 2:
        raise ValueError("n_sims must be >= 2")
    full = history.concat(test) if history is not None else test
    first_test_local = (history.n_bins if history is not None else 0) + 1
    ubins, cnt, alm = full.merged()
    test_sel = ubins >= first_test_local
    test_ubins = ubins[test_sel]
    if test_ubins.size < 2:
        raise ValueError("need at least two test event bins")
    hours_per_bin = full.bin_minutes / 60.0
    max_bins = max(int(horizon_days * 24 / hours_per_bin), 1)

    observed = np.diff(test_ubins) * hours_per_bin
    sims = np.zeros((n_sims, test_ubins.size))
    beta = params.beta
    R3 = np.zeros(params.dims)
    R3a = np.zeros(params.dims)
    prev = None
    idx = 0
    for k in range(ubins.size):
        if prev is not None:
            gap = ubins[k] - prev
            R3 = (1.0 - beta) ** gap * R3 + cnt[k - 1] * beta * (1.0 - beta) ** (gap - 1)
            R3a = (1.0 - beta) ** gap * R3a + cnt[k - 1] * alm[k - 1] * beta * (1.0 - beta) ** (
                gap - 1
            )
        prev = ubins[k]
        if ubins[k] < first_test_local:
            continue
        # state for a query at ubins[k] + 1, now including this event bin
        nextR3 = (1.0 - beta) * R3 + cnt[k] * beta
        nextR3a = (1.0 - beta) * R3a + cnt[k] * alm[k] * beta
        start_global = full.global_bin(int(ubins[k])) + 1
        for r in range(n_sims):
            gap_bins = _next_arrival_gap(
                params, p_alarm, nextR3, nextR3a, start_global, full, seed,
                stream=(r + 1) * ubins.size + k, max_bins=max_bins,
            )
            sims[r, idx] = gap_bins * hours_per_bin
        idx += 1

    top = max(float(observed.max()), float(sims.max()))
    n_buckets = int(np.ceil(top / bin_hours)) or 1
    edges = np.arange(n_buckets) * bin_hours

    def props(values: np.ndarray) -> np.ndarray:
        b = np.minimum((values / bin_hours).astype(int), n_buckets - 1)
        return np.bincount(b, minlength=n_buckets) / values.size

    per_sim = np.stack([props(sims[r]) for r in range(n_sims)])
    return InterarrivalHistogram(
        edges_hours=edges,
        mean_props=per_sim.mean(axis=0),
        band2sd=2.0 * per_sim.std(axis=0, ddof=1),
        observed_props=props(observed),
        n_sims=n_sims,
    )
