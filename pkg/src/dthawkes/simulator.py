"""Forward simulation of the marked model with a Bernoulli alarm mark.

Reproducibility: draws come from Philox counter-based substreams keyed by
the run seed with one substream per (global bin, dimension).  Per bin and
dimension the count is drawn first and the alarm indicator only when the
count is positive, so the naive and recursive algorithms consume the
streams identically and produce bit-identical series.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import BinnedSeries, MarkedParams, hour_of_bin

COUNT_CAP = 1_000_000_000


class SimulationError(RuntimeError):
    """Raised when the intensity explodes past the per-bin count cap."""


@dataclass(frozen=True)
class SimConfig:
    n_bins: int
    p_alarm: float
    seed: int
    params: MarkedParams
    history: BinnedSeries | None = None
    bin_minutes: int = 5
    origin_hour: int = 0
    stream: int = 0

    def __post_init__(self):
        if not (0.0 <= self.p_alarm <= 1.0):
            raise ValueError(f"p_alarm must lie in [0, 1], got {self.p_alarm}")
        if self.n_bins < 0:
            raise ValueError("n_bins must be >= 0")


def estimate_alarm_prob(series: BinnedSeries) -> float:
    """Sample fraction of event bins that sounded an alarm (the Bernoulli MLE)."""
    n_events = series.n_event_bins()
    if n_events == 0:
        raise ValueError("cannot estimate the alarm probability from an empty series")
    n_alarms = sum(int(a.sum()) for a in series.alarms)
    return n_alarms / n_events


def substream(seed: int, global_bin: int, m: int, stream: int = 0) -> np.random.Generator:
    """The counter-based stream owning all draws for (global bin, dimension);
    ``stream`` separates independent replications of the same run."""
    return np.random.Generator(
        np.random.Philox(key=[seed, stream], counter=[0, 0, global_bin, m])
    )


def branching_radius(params: MarkedParams, p_alarm: float) -> float:
    """Spectral radius of the alarm-augmented branching matrix K + p * alpha."""
    return float(np.max(np.abs(np.linalg.eigvals(params.K + p_alarm * params.alpha))))


def _grid_context(config: SimConfig):
    """Global offset, grid geometry and history arrays for a simulation run."""
    h = config.history
    if h is not None:
        offset = h.start_bin + h.n_bins  # global index of first simulated bin
        return offset, h.bin_minutes, h.origin_hour, h.merged()
    empty = (
        np.empty(0, dtype=np.int64),
        np.empty((0, config.params.dims), dtype=np.int64),
        np.empty((0, config.params.dims), dtype=bool),
    )
    return 1, config.bin_minutes, config.origin_hour, empty


def _warn_if_supercritical(config: SimConfig) -> None:
    if branching_radius(config.params, config.p_alarm) >= 1.0:
        warnings.warn(
            "branching matrix K + p*alpha is not subcritical; the simulation may explode",
            stacklevel=3,
        )


def _finish(config: SimConfig, offset, bin_minutes, origin_hour, events) -> BinnedSeries:
    M = config.params.dims
    bins = tuple(np.array([t for t, _, _ in events[m]], dtype=np.int64) for m in range(M))
    counts = tuple(np.array([c for _, c, _ in events[m]], dtype=np.int64) for m in range(M))
    alarms = tuple(np.array([a for _, _, a in events[m]], dtype=bool) for m in range(M))
    return BinnedSeries(
        dims=M,
        n_bins=config.n_bins,
        bins=bins,
        counts=counts,
        alarms=alarms,
        bin_minutes=bin_minutes,
        origin_hour=origin_hour,
        start_bin=offset,
    )


def _draw(config: SimConfig, seed_bin: int, m: int, lam: float) -> tuple[int, bool]:
    if not np.isfinite(lam) or lam > COUNT_CAP:
        raise SimulationError(f"intensity {lam} past the count cap; explosive parameters")
    gen = substream(config.seed, seed_bin, m, config.stream)
    y = int(gen.poisson(lam))
    alarm = bool(y > 0 and gen.random() < config.p_alarm)
    return y, alarm


def simulate_naive(config: SimConfig) -> BinnedSeries:
    """Simulate with the intensity recomputed by full summation each bin."""
    _warn_if_supercritical(config)
    params = config.params
    M = params.dims
    beta = params.beta
    offset, bin_minutes, origin_hour, (hbins, hcnt, halm) = _grid_context(config)
    events: list[list[tuple[int, int, bool]]] = [[] for _ in range(M)]
    # flat record of every generated (global bin, dim, count, alarmed) so far
    past: list[tuple[int, int, int, bool]] = [
        (int(hbins[j]), l, int(hcnt[j, l]), bool(halm[j, l]))
        for j in range(hbins.shape[0])
        for l in range(M)
        if hcnt[j, l] > 0
    ]
    for step in range(1, config.n_bins + 1):
        g = offset + step - 1
        s = params.season.at_hour(hour_of_bin(g, bin_minutes, origin_hour))
        for m in range(M):
            lam = params.mu[m] * s
            for (v, l, y, alarmed) in past:
                if v <= g - 1:
                    f = params.K[l, m] + (params.alpha[l, m] if alarmed else 0.0)
                    lam += y * f * beta * (1.0 - beta) ** (g - v - 1)
            y, alarm = _draw(config, g, m, lam)
            if y > 0:
                events[m].append((step, y, alarm))
                past.append((g, m, y, alarm))
    return _finish(config, offset, bin_minutes, origin_hour, events)


def simulate_recursive(config: SimConfig) -> BinnedSeries:
    """Simulate with the per-bin R^3 / R^3_a recursion; same draws, O(M^2)
    per bin."""
    _warn_if_supercritical(config)
    params = config.params
    M = params.dims
    beta = params.beta
    offset, bin_minutes, origin_hour, (hbins, hcnt, halm) = _grid_context(config)
    # prime the state with the decayed history mass at the first simulated bin
    R3 = np.zeros(M)
    R3a = np.zeros(M)
    for j in range(hbins.shape[0]):
        w = beta * (1.0 - beta) ** (offset - hbins[j] - 1)
        R3 += hcnt[j] * w
        R3a += hcnt[j] * halm[j] * w
    events: list[list[tuple[int, int, bool]]] = [[] for _ in range(M)]
    y_prev = np.zeros(M)
    ya_prev = np.zeros(M)
    for step in range(1, config.n_bins + 1):
        g = offset + step - 1
        if step > 1:
            R3 = (1.0 - beta) * R3 + y_prev * beta
            R3a = (1.0 - beta) * R3a + ya_prev * beta
        s = params.season.at_hour(hour_of_bin(g, bin_minutes, origin_hour))
        lam_vec = params.mu * s + R3 @ params.K + R3a @ params.alpha
        for m in range(M):
            y, alarm = _draw(config, g, m, float(lam_vec[m]))
            y_prev[m] = y
            ya_prev[m] = y if alarm else 0
            if y > 0:
                events[m].append((step, y, alarm))
    return _finish(config, offset, bin_minutes, origin_hour, events)
