"""Core data types: binned event series, parameter sets, seasonality and the
geometric excitation kernel primitives shared by every engine."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

import numpy as np

SEASON_FLOOR = 1e-6
# direct powers of (1 - beta) below this exponent, log-space above (underflow)
_POW_DIRECT_LIMIT = 1000


def pow1m(beta: float, n) -> float | np.ndarray:
    """(1 - beta)**n, evaluated in log space for very large n."""
    n = np.asarray(n)
    if np.all(n <= _POW_DIRECT_LIMIT):
        out = (1.0 - beta) ** n
    else:
        out = np.exp(n * math.log1p(-beta))
    if out.ndim == 0:
        return float(out)
    return out


def _check_beta(beta: float) -> None:
    if not (0.0 < beta < 1.0):
        raise ValueError(f"beta must lie in (0, 1), got {beta}")


def geometric_pmf(beta: float, n: int) -> float:
    """Geometric kernel mass g(n) = beta * (1 - beta)^(n - 1), n >= 1."""
    _check_beta(beta)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return beta * pow1m(beta, n - 1)


def geometric_cdf(beta: float, n: int) -> float:
    """Cumulative kernel mass G(n) = 1 - (1 - beta)^n, n >= 0."""
    _check_beta(beta)
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    return 1.0 - pow1m(beta, n)


def hour_of_bin(t: int, bin_minutes: int, origin_hour: int) -> int:
    """Hour-of-day bucket (1..24) containing the start of bin t (1-based)."""
    if t < 1:
        raise ValueError(f"bin index must be >= 1, got {t}")
    return (origin_hour + (t - 1) * bin_minutes // 60) % 24 + 1


def hours_for_bins(t: np.ndarray, bin_minutes: int, origin_hour: int) -> np.ndarray:
    """Vectorized hour_of_bin over an array of 1-based bin indices."""
    t = np.asarray(t, dtype=np.int64)
    return (origin_hour + (t - 1) * bin_minutes // 60) % 24 + 1


@dataclass(frozen=True)
class SeasonalProfile:
    """Fixed hour-of-day multiplier on the background rate.

    values[h-1] holds s(h) for h = 1..24; all entries strictly positive.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (24,):
            raise ValueError(f"seasonal profile needs 24 values, got shape {v.shape}")
        if not np.all(v > 0):
            raise ValueError("seasonal profile values must be strictly positive")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def uniform(cls) -> "SeasonalProfile":
        return cls(np.full(24, 1.0))

    @classmethod
    def flat_normalized(cls) -> "SeasonalProfile":
        return cls(np.full(24, 1.0 / 24.0))

    def at_hour(self, h: int) -> float:
        return float(self.values[h - 1])


@dataclass(frozen=True)
class BinnedSeries:
    """Multivariate integer count series on a 1-based discrete bin grid.

    Events are stored sparsely: for each dimension m, ``bins[m]`` is the
    strictly increasing array of bins holding at least one event,
    ``counts[m]`` the per-bin totals (>= 1) and ``alarms[m]`` flags the
    bins whose events sounded an alarm.  ``start_bin`` is the global grid
    index of local bin 1, so a simulated continuation of a history keeps
    its hour-of-day phase.
    """

    dims: int
    n_bins: int
    bins: tuple[np.ndarray, ...]
    counts: tuple[np.ndarray, ...]
    alarms: tuple[np.ndarray, ...]
    bin_minutes: int = 5
    origin_hour: int = 0
    start_bin: int = 1
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.dims < 1 or self.n_bins < 0:
            raise ValueError("dims must be >= 1 and n_bins >= 0")
        if not (0 <= self.origin_hour <= 23):
            raise ValueError(f"origin_hour must be 0..23, got {self.origin_hour}")
        if len(self.bins) != self.dims or len(self.counts) != self.dims or len(self.alarms) != self.dims:
            raise ValueError("bins/counts/alarms must have one entry per dimension")
        if self.labels is not None and len(self.labels) != self.dims:
            raise ValueError("labels length must equal dims")
        bins, counts, alarms = [], [], []
        for m in range(self.dims):
            b = np.asarray(self.bins[m], dtype=np.int64)
            c = np.asarray(self.counts[m], dtype=np.int64)
            a = np.asarray(self.alarms[m], dtype=bool)
            if not (b.shape == c.shape == a.shape):
                raise ValueError(f"dimension {m}: bins/counts/alarms lengths differ")
            if b.size and (np.any(np.diff(b) <= 0)):
                raise ValueError(f"dimension {m}: event bins must be strictly increasing")
            if b.size and (b[0] < 1 or b[-1] > self.n_bins):
                raise ValueError(f"dimension {m}: event bins outside [1, {self.n_bins}]")
            if np.any(c < 1):
                raise ValueError(f"dimension {m}: counts at event bins must be >= 1")
            for arr in (b, c, a):
                arr.flags.writeable = False
            bins.append(b)
            counts.append(c)
            alarms.append(a)
        object.__setattr__(self, "bins", tuple(bins))
        object.__setattr__(self, "counts", tuple(counts))
        object.__setattr__(self, "alarms", tuple(alarms))

    # -- queries ---------------------------------------------------------

    def total_events(self) -> int:
        return int(sum(c.sum() for c in self.counts))

    def n_event_bins(self) -> int:
        return int(sum(b.size for b in self.bins))

    def count_at(self, m: int, t: int) -> int:
        idx = np.searchsorted(self.bins[m], t)
        if idx < self.bins[m].size and self.bins[m][idx] == t:
            return int(self.counts[m][idx])
        return 0

    def global_bin(self, t: int) -> int:
        return self.start_bin + (t - 1)

    def hour_at(self, t: int) -> int:
        return hour_of_bin(self.global_bin(t), self.bin_minutes, self.origin_hour)

    def hours_at(self, t: np.ndarray) -> np.ndarray:
        return hours_for_bins(
            np.asarray(t, dtype=np.int64) + (self.start_bin - 1),
            self.bin_minutes,
            self.origin_hour,
        )

    def seasonal_grid_sum(self, season: SeasonalProfile) -> float:
        """Sum of s(h(t)) over the whole grid t = 1..n_bins."""
        period = 24 * 60 // math.gcd(24 * 60, self.bin_minutes)  # bins per day
        if self.n_bins <= period:
            h = self.hours_at(np.arange(1, self.n_bins + 1))
            return float(season.values[h - 1].sum())
        full, rest = divmod(self.n_bins, period)
        h = self.hours_at(np.arange(1, period + 1))
        day_sum = float(season.values[h - 1].sum())
        tail = 0.0
        if rest:
            h_rest = self.hours_at(np.arange(full * period + 1, self.n_bins + 1))
            tail = float(season.values[h_rest - 1].sum())
        return full * day_sum + tail

    def merged(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Distinct sorted event bins with dense per-dimension counts.

        Returns (ubins, counts, alarms) where ubins has shape (n_u,),
        counts (n_u, M) and alarms (n_u, M).
        """
        if self.n_event_bins() == 0:
            return (
                np.empty(0, dtype=np.int64),
                np.empty((0, self.dims), dtype=np.int64),
                np.empty((0, self.dims), dtype=bool),
            )
        ubins = np.unique(np.concatenate([b for b in self.bins if b.size]))
        cnt = np.zeros((ubins.size, self.dims), dtype=np.int64)
        alm = np.zeros((ubins.size, self.dims), dtype=bool)
        for m in range(self.dims):
            pos = np.searchsorted(ubins, self.bins[m])
            cnt[pos, m] = self.counts[m]
            alm[pos, m] = self.alarms[m]
        return ubins, cnt, alm

    def slice_bins(self, first: int, last: int) -> "BinnedSeries":
        """Sub-series over local bins [first, last], re-indexed from 1."""
        if not (1 <= first <= last + 1 and last <= self.n_bins):
            raise ValueError(f"invalid slice [{first}, {last}] of {self.n_bins} bins")
        bins, counts, alarms = [], [], []
        for m in range(self.dims):
            sel = (self.bins[m] >= first) & (self.bins[m] <= last)
            bins.append(self.bins[m][sel] - (first - 1))
            counts.append(self.counts[m][sel])
            alarms.append(self.alarms[m][sel])
        return BinnedSeries(
            dims=self.dims,
            n_bins=last - first + 1,
            bins=tuple(bins),
            counts=tuple(counts),
            alarms=tuple(alarms),
            bin_minutes=self.bin_minutes,
            origin_hour=self.origin_hour,
            start_bin=self.start_bin + (first - 1),
            labels=self.labels,
        )

    def concat(self, other: "BinnedSeries") -> "BinnedSeries":
        """Append a series that immediately follows this one on the grid."""
        if other.dims != self.dims or other.bin_minutes != self.bin_minutes:
            raise ValueError("series are not on the same grid")
        if other.start_bin != self.start_bin + self.n_bins:
            raise ValueError("series to append does not immediately follow")
        bins = tuple(
            np.concatenate([self.bins[m], other.bins[m] + self.n_bins])
            for m in range(self.dims)
        )
        counts = tuple(
            np.concatenate([self.counts[m], other.counts[m]]) for m in range(self.dims)
        )
        alarms = tuple(
            np.concatenate([self.alarms[m], other.alarms[m]]) for m in range(self.dims)
        )
        return BinnedSeries(
            dims=self.dims,
            n_bins=self.n_bins + other.n_bins,
            bins=bins,
            counts=counts,
            alarms=alarms,
            bin_minutes=self.bin_minutes,
            origin_hour=self.origin_hour,
            start_bin=self.start_bin,
            labels=self.labels,
        )

    # -- serialization ---------------------------------------------------

    def write(self, csv_path: str | Path, sidecar_path: str | Path) -> None:
        csv_path, sidecar_path = Path(csv_path), Path(sidecar_path)
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bin", "ward", "count", "alarm"])
            rows = []
            for m in range(self.dims):
                label = self.labels[m] if self.labels else str(m)
                for b, c, a in zip(self.bins[m], self.counts[m], self.alarms[m]):
                    rows.append((int(b), label, int(c), int(a)))
            rows.sort()
            w.writerows(rows)
        meta = {
            "dims": self.dims,
            "n_bins": self.n_bins,
            "bin_minutes": self.bin_minutes,
            "origin_hour": self.origin_hour,
            "start_bin": self.start_bin,
            "labels": list(self.labels) if self.labels else None,
        }
        sidecar_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")

    @classmethod
    def read(cls, csv_path: str | Path, sidecar_path: str | Path) -> "BinnedSeries":
        meta = json.loads(Path(sidecar_path).read_text())
        dims = meta["dims"]
        labels = meta.get("labels")
        if labels:
            index = {lab: m for m, lab in enumerate(labels)}
        else:
            index = {str(m): m for m in range(dims)}
        per_dim: list[dict[int, tuple[int, bool]]] = [dict() for _ in range(dims)]
        with open(csv_path, newline="") as fh:
            lines = (ln for ln in fh if not ln.startswith("#"))
            for row in csv.DictReader(lines):
                m = index[row["ward"]]
                per_dim[m][int(row["bin"])] = (int(row["count"]), row["alarm"] == "1")
        bins, counts, alarms = [], [], []
        for m in range(dims):
            ts = sorted(per_dim[m])
            bins.append(np.array(ts, dtype=np.int64))
            counts.append(np.array([per_dim[m][t][0] for t in ts], dtype=np.int64))
            alarms.append(np.array([per_dim[m][t][1] for t in ts], dtype=bool))
        return cls(
            dims=dims,
            n_bins=meta["n_bins"],
            bins=tuple(bins),
            counts=tuple(counts),
            alarms=tuple(alarms),
            bin_minutes=meta["bin_minutes"],
            origin_hour=meta["origin_hour"],
            start_bin=meta.get("start_bin", 1),
            labels=tuple(labels) if labels else None,
        )


@dataclass(frozen=True)
class MarkedParams:
    """Parameters of the marked model: backgrounds mu, excitation matrices
    K (non-alarm) and alpha (extra alarm excitation), shared kernel decay
    beta, and a fixed seasonal profile.

    K[l, m] is the expected number of direct offspring in dimension m per
    non-alarm event in dimension l; alarm events contribute K + alpha.
    """

    mu: np.ndarray
    K: np.ndarray
    alpha: np.ndarray
    beta: float
    season: SeasonalProfile = field(default_factory=SeasonalProfile.uniform)

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        K = np.asarray(self.K, dtype=float)
        alpha = np.asarray(self.alpha, dtype=float)
        M = mu.shape[0]
        if mu.ndim != 1 or K.shape != (M, M) or alpha.shape != (M, M):
            raise ValueError("inconsistent parameter shapes")
        if not np.all(mu > 0):
            raise ValueError("mu entries must be strictly positive")
        if np.any(K < 0) or np.any(alpha < 0):
            raise ValueError("K and alpha entries must be non-negative")
        _check_beta(self.beta)
        for arr in (mu, K, alpha):
            arr.flags.writeable = False
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "alpha", alpha)

    @property
    def dims(self) -> int:
        return self.mu.shape[0]

    def background(self, series: BinnedSeries, t) -> np.ndarray | float:
        """mu^(m) * s(h(t)); vectorized over t when given an array."""
        h = series.hours_at(np.atleast_1d(np.asarray(t, dtype=np.int64)))
        s = self.season.values[h - 1]
        out = np.multiply.outer(s, self.mu)
        return out if np.ndim(t) else out[0]


@dataclass(frozen=True)
class UnmarkedParams:
    """Appendix model parameters: constant backgrounds mu, excitation matrix
    K and per-pair decay matrix B with entries beta_{l,m} in (0, 1)."""

    mu: np.ndarray
    K: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        K = np.asarray(self.K, dtype=float)
        B = np.asarray(self.B, dtype=float)
        M = mu.shape[0]
        if mu.ndim != 1 or K.shape != (M, M) or B.shape != (M, M):
            raise ValueError("inconsistent parameter shapes")
        if not np.all(mu > 0):
            raise ValueError("mu entries must be strictly positive")
        if np.any(K < 0):
            raise ValueError("K entries must be non-negative")
        if not np.all((B > 0) & (B < 1)):
            raise ValueError("all decay entries must lie in (0, 1)")
        for arr in (mu, K, B):
            arr.flags.writeable = False
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "B", B)

    @property
    def dims(self) -> int:
        return self.mu.shape[0]


@dataclass(frozen=True)
class RawEvent:
    """One ingested record: a minute-precision timestamp, a ward label and
    whether the event sounded an alarm."""

    timestamp: datetime
    ward: str
    alarm: bool


def bin_events(
    events: list[RawEvent],
    bin_minutes: int,
    span: tuple[datetime, datetime],
    wards: list[str] | None = None,
) -> BinnedSeries:
    """Aggregate raw events onto the discrete bin grid covering ``span``.

    A bin's alarm mark is set iff at least one of its events alarmed.
    ``wards`` fixes the dimension order; by default labels are taken in
    first-appearance order.
    """
    start, end = span
    total_minutes = (end - start).total_seconds() / 60.0
    if total_minutes < 0 or total_minutes != int(total_minutes):
        raise ValueError("span must be a whole number of minutes")
    if int(total_minutes) % bin_minutes != 0:
        raise ValueError("span length must be an integer multiple of bin_minutes")
    n_bins = int(total_minutes) // bin_minutes

    if wards is None:
        seen: dict[str, None] = {}
        for ev in events:
            seen.setdefault(ev.ward, None)
        wards = list(seen)
    index = {w: m for m, w in enumerate(wards)}
    dims = max(len(wards), 1)

    acc: list[dict[int, list[int]]] = [dict() for _ in range(dims)]
    for ev in events:
        if ev.ward not in index:
            raise ValueError(f"unknown ward label {ev.ward!r}")
        offset = (ev.timestamp - start).total_seconds() / 60.0
        if offset < 0 or offset > total_minutes:
            raise ValueError(f"timestamp {ev.timestamp} outside span")
        t = min(int(offset) // bin_minutes + 1, n_bins)
        cell = acc[index[ev.ward]].setdefault(t, [0, 0])
        cell[0] += 1
        cell[1] |= int(ev.alarm)

    bins, counts, alarms = [], [], []
    for m in range(dims):
        ts = sorted(acc[m])
        bins.append(np.array(ts, dtype=np.int64))
        counts.append(np.array([acc[m][t][0] for t in ts], dtype=np.int64))
        alarms.append(np.array([bool(acc[m][t][1]) for t in ts], dtype=bool))
    return BinnedSeries(
        dims=dims,
        n_bins=n_bins,
        bins=tuple(bins),
        counts=tuple(counts),
        alarms=tuple(alarms),
        bin_minutes=bin_minutes,
        origin_hour=start.hour,
        labels=tuple(wards) if wards else None,
    )


def read_raw_events(path: str | Path) -> list[RawEvent]:
    """Parse a ``timestamp,ward,alarm`` CSV; raises with the offending row
    number on malformed input."""
    events = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or set(reader.fieldnames) != {"timestamp", "ward", "alarm"}:
            raise ValueError(f"expected header timestamp,ward,alarm, got {reader.fieldnames}")
        for i, row in enumerate(reader, start=2):
            try:
                ts = datetime.fromisoformat(row["timestamp"])
                alarm = {"0": False, "1": True}[row["alarm"].strip()]
            except (ValueError, KeyError) as exc:
                raise ValueError(f"row {i}: malformed record {row}") from exc
            events.append(RawEvent(timestamp=ts, ward=row["ward"], alarm=alarm))
    return events


def estimate_seasonal_profile(series: BinnedSeries) -> SeasonalProfile:
    """Empirical hour-of-day event proportions, pooled over all dimensions.

    Zero hours are floored at SEASON_FLOOR and the vector renormalized so
    the profile stays strictly positive.
    """
    if series.total_events() == 0:
        raise ValueError("cannot estimate a seasonal profile from an empty series")
    tally = np.zeros(24)
    for m in range(series.dims):
        if series.bins[m].size:
            h = series.hours_at(series.bins[m])
            np.add.at(tally, h - 1, series.counts[m])
    prop = tally / tally.sum()
    prop = np.maximum(prop, SEASON_FLOOR)
    prop /= prop.sum()
    return SeasonalProfile(prop)
