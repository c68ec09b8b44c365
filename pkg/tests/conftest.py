import numpy as np
import pytest

from dthawkes import BinnedSeries, MarkedParams, SeasonalProfile


def random_params(rng: np.random.Generator, M: int, seasonal: bool = True) -> MarkedParams:
    """A random subcritical marked parameter set."""
    season = (
        SeasonalProfile(rng.uniform(0.5, 1.5, 24)) if seasonal else SeasonalProfile.uniform()
    )
    return MarkedParams(
        mu=rng.uniform(0.05, 0.4, M),
        K=rng.uniform(0.0, 0.3 / M, (M, M)),
        alpha=rng.uniform(0.0, 0.2 / M, (M, M)),
        beta=rng.uniform(0.1, 0.9),
        season=season,
    )


def sparse_series(rng: np.random.Generator, M: int, N: int, density: float = 0.1) -> BinnedSeries:
    """A random sparse series built directly (no model behind it)."""
    bins, counts, alarms = [], [], []
    for _ in range(M):
        n_ev = max(1, int(density * N * rng.uniform(0.3, 1.5)))
        n_ev = min(n_ev, N)
        b = np.sort(rng.choice(np.arange(1, N + 1), size=n_ev, replace=False))
        bins.append(b)
        counts.append(rng.integers(1, 4, size=n_ev))
        alarms.append(rng.random(n_ev) < 0.3)
    return BinnedSeries(
        dims=M,
        n_bins=N,
        bins=tuple(bins),
        counts=tuple(counts),
        alarms=tuple(alarms),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
