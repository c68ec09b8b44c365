"""Figure rendering for the report command.

Every function takes an already-computed result object and writes one PNG;
no statistics are produced here, so the figures always match the CSV output
emitted next to them.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .evaluator import ForecastResult, InterarrivalHistogram, TriggeringReport  # noqa: E402

_COMPONENT_LABELS = ("background", "non-alarm self", "non-alarm cross", "alarm self", "alarm cross")


def plot_triggering(report: TriggeringReport, path: str | Path) -> None:
    """Stacked per-event attribution shares in event order, one band per
    intensity component."""
    shares = report.per_event[:, 2:]
    x = range(shares.shape[0])
    fig, ax = plt.subplots(figsize=(9, 4))
    ax.stackplot(x, shares.T, labels=_COMPONENT_LABELS, alpha=0.85)
    ax.set_xlabel("event bin (chronological order)")
    ax.set_ylabel("share of intensity")
    ax.set_ylim(0, 1)
    ax.legend(loc="upper right", fontsize=8, ncol=2)
    ax.set_title("Triggering attribution per event")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_interarrival(hist: InterarrivalHistogram, path: str | Path) -> None:
    """Simulated interarrival proportions with two-standard-deviation error
    bars, overlaid with the observed proportions."""
    width = float(hist.edges_hours[1] - hist.edges_hours[0]) if hist.edges_hours.size > 1 else 1.0
    centers = hist.edges_hours + width / 2.0
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.bar(
        centers,
        hist.mean_props,
        width=0.9 * width,
        yerr=hist.band2sd,
        capsize=3,
        label=f"simulated mean of {hist.n_sims} runs (±2 sd)",
        color="tab:blue",
        alpha=0.7,
    )
    ax.step(
        hist.edges_hours,
        hist.observed_props,
        where="post",
        color="tab:red",
        label="observed",
    )
    ax.set_xlabel("interarrival time (hours)")
    ax.set_ylabel("proportion")
    ax.legend(fontsize=8)
    ax.set_title("Interarrival-time calibration")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_forecast(
    result: ForecastResult, path: str | Path, labels: tuple[str, ...] | None = None
) -> None:
    """One histogram of simulated horizon totals per ward, with the mean and
    the central 95% interval marked."""
    M = result.totals.shape[1]
    ncols = min(M, 3)
    nrows = (M + ncols - 1) // ncols
    fig, axes = plt.subplots(nrows, ncols, figsize=(4 * ncols, 3 * nrows), squeeze=False)
    for m in range(M):
        ax = axes[m // ncols][m % ncols]
        ax.hist(result.totals[:, m], bins=20, color="tab:blue", alpha=0.7)
        ax.axvline(result.mean[m], color="black", label="mean")
        ax.axvline(result.lower95[m], color="tab:red", linestyle="--", label="95% interval")
        ax.axvline(result.upper95[m], color="tab:red", linestyle="--")
        name = labels[m] if labels else f"ward {m}"
        ax.set_title(f"{name}: totals over {result.horizon_bins} bins", fontsize=9)
        if m == 0:
            ax.legend(fontsize=7)
    for k in range(M, nrows * ncols):
        axes[k // ncols][k % ncols].axis("off")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
