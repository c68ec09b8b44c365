"""Command-line surface: ingestion, fitting, cross-validation, simulation,
forecasting, evaluation, figure reports and the complexity benchmark.

Configuration comes from an optional JSON file whose top-level keys are
command names mapping to option dictionaries (option names with
underscores); explicit command-line flags override file values, which
override built-in defaults.  Every output file embeds the run seed, a hash
of the resolved configuration and the artifact version, and re-running a
command with identical inputs reproduces its outputs byte for byte.

Exit codes: 0 success, 2 input error, 3 non-convergence (the report is
still written), 4 numerical failure.
"""

from __future__ import annotations

import csv
import functools
import hashlib
import json
import sys
import time
from datetime import datetime, timedelta
from pathlib import Path

import click
import numpy as np

from .core import (
    BinnedSeries,
    MarkedParams,
    SeasonalProfile,
    bin_events,
    estimate_seasonal_profile,
    read_raw_events,
)
from .estimator import FitConfig, FitError, FitReport, cross_validate_lambda, fit
from .evaluator import (
    forecast as run_forecast,
    interarrival_check,
    predictive_loglik,
    triggering_report,
)
from .likelihood import LikelihoodError, loglik_naive, loglik_recursive
from .simulator import (
    SimConfig,
    SimulationError,
    estimate_alarm_prob,
    simulate_recursive,
)

ARTIFACT_VERSION = "1"

SPLIT_TOL = 1e-9


# -- plumbing ------------------------------------------------------------


def _config_hash(resolved: dict) -> str:
    # the output destination does not affect the computation, so it is not
    # part of the reproducibility hash
    hashed = {k: v for k, v in resolved.items() if k != "out"}
    blob = json.dumps(hashed, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def _stamp(resolved: dict) -> dict:
    return {
        "seed": resolved.get("seed", 0),
        "config_hash": _config_hash(resolved),
        "artifact_version": ARTIFACT_VERSION,
    }


def _stamp_line(stamp: dict) -> str:
    return (
        f"# seed={stamp['seed']} config_hash={stamp['config_hash']} "
        f"artifact_version={stamp['artifact_version']}\n"
    )


# settings that may stay unset; each command substitutes its own behavior
_OPTIONAL = {"span_start", "span_end", "season", "history", "p_alarm"}


def _resolve(command: str, config_path: str | None, defaults: dict, flags: dict) -> dict:
    """Merge defaults, the command's config-file section and explicit flags,
    in increasing precedence."""
    file_vals: dict = {}
    if config_path:
        doc = json.loads(Path(config_path).read_text())
        if not isinstance(doc, dict):
            raise ValueError("config file must hold a JSON object keyed by command name")
        file_vals = doc.get(command, {})
        unknown = sorted(set(file_vals) - set(defaults))
        if unknown:
            raise ValueError(f"unknown config keys for {command!r}: {unknown}")
    resolved = dict(defaults)
    resolved.update(file_vals)
    resolved.update({k: v for k, v in flags.items() if v is not None})
    missing = sorted(k for k, v in resolved.items() if v is None and k not in _OPTIONAL)
    if missing:
        raise ValueError(f"missing required settings for {command!r}: {missing}")
    return resolved


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n")


def _write_csv(path: Path, stamp: dict, header: list[str], rows: list) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(_stamp_line(stamp))
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _write_series(series: BinnedSeries, csv_path: Path, stamp: dict) -> None:
    sidecar = csv_path.with_suffix(".json")
    series.write(csv_path, sidecar)
    text = csv_path.read_text()
    csv_path.write_text(_stamp_line(stamp) + text)
    meta = json.loads(sidecar.read_text())
    meta.update(stamp)
    _write_json(sidecar, meta)


def _read_series(path: str | Path) -> BinnedSeries:
    csv_path = Path(path)
    sidecar = csv_path.with_suffix(".json")
    if not sidecar.exists():
        raise ValueError(f"series sidecar {sidecar} not found next to {csv_path}")
    return BinnedSeries.read(csv_path, sidecar)


def _load_params(path: str | Path) -> MarkedParams:
    """Accept a fit-report file or any JSON object with the parameter keys."""
    d = json.loads(Path(path).read_text())
    season = (
        SeasonalProfile(np.array(d["season"])) if "season" in d else SeasonalProfile.uniform()
    )
    return MarkedParams(
        mu=np.array(d["mu"]),
        K=np.array(d["K"]),
        alpha=np.array(d["alpha"]),
        beta=d["beta"],
        season=season,
    )


def _load_season(path: str | None) -> SeasonalProfile:
    if path is None:
        return SeasonalProfile.uniform()
    d = json.loads(Path(path).read_text())
    values = d["values"] if isinstance(d, dict) else d
    return SeasonalProfile(np.array(values, dtype=float))


def _guard(fn):
    """Map exceptions onto the exit-code contract."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (FitError, SimulationError, LikelihoodError, FloatingPointError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(4)
        except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)

    return wrapper


# -- commands ------------------------------------------------------------


@click.group()
@click.version_option(version=ARTIFACT_VERSION, prog_name="dthawkes")
def main():
    """Discrete-time marked Hawkes modelling of ward-level event streams."""


_INGEST_DEFAULTS = {
    "data": None,
    "bin_minutes": 5,
    "span_start": None,
    "span_end": None,
    "train_frac": 0.75,
    "val_frac": 0.10,
    "test_frac": 0.15,
    "out": None,
    "seed": 0,
}


@main.command()
@click.option("--config", type=click.Path(exists=True), default=None)
@click.option("--data", type=click.Path(exists=True), default=None)
@click.option("--bin-minutes", type=int, default=None)
@click.option("--span-start", default=None, help="ISO start of the grid (default: floor of first event to the hour)")
@click.option("--span-end", default=None, help="ISO end of the grid (default: ceiling of last event to the hour)")
@click.option("--train-frac", type=float, default=None)
@click.option("--val-frac", type=float, default=None)
@click.option("--test-frac", type=float, default=None)
@click.option("--out", type=click.Path(), default=None)
@click.option("--seed", type=int, default=None)
@_guard
def ingest(config, **flags):
    """Bin a raw timestamp,ward,alarm CSV and write chronological splits."""
    r = _resolve("ingest", config, _INGEST_DEFAULTS, flags)
    fracs = (r["train_frac"], r["val_frac"], r["test_frac"])
    if min(fracs) <= 0 or abs(sum(fracs) - 1.0) > SPLIT_TOL:
        raise ValueError(f"split fractions must be positive and sum to 1, got {fracs}")
    events = read_raw_events(r["data"])
    if not events:
        raise ValueError("input file holds no events")
    if r["span_start"] is not None:
        start = datetime.fromisoformat(r["span_start"])
    else:
        start = min(e.timestamp for e in events).replace(minute=0, second=0, microsecond=0)
    if r["span_end"] is not None:
        end = datetime.fromisoformat(r["span_end"])
    else:
        last = max(e.timestamp for e in events)
        end = last.replace(minute=0, second=0, microsecond=0)
        if end < last:
            end += timedelta(hours=1)
    full = bin_events(events, r["bin_minutes"], (start, end))

    n = full.n_bins
    n_train = int(fracs[0] * n)
    n_val = int(fracs[1] * n)
    if n_train < 1 or n_val < 1 or n_train + n_val >= n:
        raise ValueError(f"series of {n} bins is too short for splits {fracs}")
    train = full.slice_bins(1, n_train)
    val = full.slice_bins(n_train + 1, n_train + n_val)
    test = full.slice_bins(n_train + n_val + 1, n)
    season = estimate_seasonal_profile(train)

    stamp = _stamp(r)
    out = Path(r["out"])
    out.mkdir(parents=True, exist_ok=True)
    for name, series in (("full", full), ("train", train), ("val", val), ("test", test)):
        _write_series(series, out / f"{name}.csv", stamp)
    _write_json(out / "season.json", {"values": season.values.tolist(), **stamp})
    _write_json(
        out / "manifest.json",
        {
            "n_bins": n,
            "bin_minutes": r["bin_minutes"],
            "span_start": start.isoformat(),
            "span_end": end.isoformat(),
            "splits": {"train": n_train, "val": n_val, "test": n - n_train - n_val},
            "wards": list(full.labels) if full.labels else None,
            "total_events": full.total_events(),
            **stamp,
        },
    )
    click.echo(f"ingested {full.total_events()} events into {n} bins under {out}")


_FIT_DEFAULTS = {
    "train": None,
    "season": None,
    "variant": "MHPA",
    "lambda_h": 0.0,
    "max_iters": 5000,
    "tol": 1e-8,
    "seed": 0,
    "init": "default",
    "out": None,
}


def _fit_options(fn):
    for opt in reversed(
        [
            click.option("--config", type=click.Path(exists=True), default=None),
            click.option("--train", type=click.Path(exists=True), default=None),
            click.option("--season", type=click.Path(exists=True), default=None),
            click.option("--variant", type=click.Choice(["IPP", "UHP", "MHP", "MHPA"]), default=None),
            click.option("--lambda-h", type=float, default=None),
            click.option("--max-iters", type=int, default=None),
            click.option("--tol", type=float, default=None),
            click.option("--seed", type=int, default=None),
            click.option("--init", type=click.Choice(["default", "jitter"]), default=None),
            click.option("--out", type=click.Path(), default=None),
        ]
    ):
        fn = opt(fn)
    return fn


def _fit_once(resolved: dict, train: BinnedSeries) -> FitReport:
    season = _load_season(resolved["season"])
    cfg = FitConfig(
        variant=resolved["variant"],
        lambda_h=resolved["lambda_h"],
        max_iters=resolved["max_iters"],
        tol=resolved["tol"],
        seed=resolved["seed"],
        init=resolved["init"],
    )
    return fit(train, season, cfg)


@main.command("fit")
@_fit_options
@_guard
def fit_cmd(config, **flags):
    """Fit one model variant on a training series and write the report."""
    r = _resolve("fit", config, _FIT_DEFAULTS, flags)
    train = _read_series(r["train"])
    report = _fit_once(r, train)
    Path(r["out"]).write_text(report.to_json(extra=_stamp(r)) + "\n")
    status = "converged" if report.converged else "did NOT converge"
    click.echo(
        f"{report.variant} {status} after {report.n_iters} iterations, "
        f"objective {report.final_objective:.6f}"
    )
    if not report.converged:
        sys.exit(3)


_CV_DEFAULTS = dict(_FIT_DEFAULTS, val=None, grid="0,0.1,0.5,2,10")


@main.command()
@_fit_options
@click.option("--val", type=click.Path(exists=True), default=None)
@click.option("--grid", default=None, help="comma-separated lambda_h grid")
@_guard
def cv(config, **flags):
    """Cross-validate the ridge weight on a chronological validation split."""
    r = _resolve("cv", config, _CV_DEFAULTS, flags)
    grid = [float(v) for v in str(r["grid"]).split(",") if v.strip() != ""]
    train = _read_series(r["train"])
    val = _read_series(r["val"])
    season = _load_season(r["season"])
    cfg = FitConfig(
        variant=r["variant"],
        lambda_h=0.0,
        max_iters=r["max_iters"],
        tol=r["tol"],
        seed=r["seed"],
        init=r["init"],
    )
    best, scores, reports = cross_validate_lambda(train, val, season, grid, cfg)
    winner = reports[best]
    payload = json.loads(winner.to_json(extra=_stamp(r)))
    payload["best_lambda_h"] = best
    payload["validation_scores"] = {str(lh): scores[lh] for lh in sorted(scores)}
    _write_json(Path(r["out"]), payload)
    click.echo(f"best lambda_h = {best} (validation pLL {scores[best]:.6f})")
    if not winner.converged:
        sys.exit(3)


_SIM_DEFAULTS = {
    "params": None,
    "n_bins": None,
    "p_alarm": None,
    "seed": 0,
    "stream": 0,
    "bin_minutes": 5,
    "origin_hour": 0,
    "history": None,
    "out": None,
}


@main.command()
@click.option("--config", type=click.Path(exists=True), default=None)
@click.option("--params", type=click.Path(exists=True), default=None)
@click.option("--n-bins", type=int, default=None)
@click.option("--p-alarm", type=float, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--stream", type=int, default=None)
@click.option("--bin-minutes", type=int, default=None)
@click.option("--origin-hour", type=int, default=None)
@click.option("--history", type=click.Path(exists=True), default=None)
@click.option("--out", type=click.Path(), default=None)
@_guard
def simulate(config, **flags):
    """Simulate a seeded series, optionally continuing a history."""
    r = _resolve("simulate", config, _SIM_DEFAULTS, flags)
    if r["history"] == "":
        r["history"] = None
    if r["p_alarm"] is None:
        raise ValueError("p_alarm is required for simulation")
    params = _load_params(r["params"])
    history = _read_series(r["history"]) if r["history"] else None
    sim = simulate_recursive(
        SimConfig(
            n_bins=r["n_bins"],
            p_alarm=r["p_alarm"],
            seed=r["seed"],
            params=params,
            history=history,
            bin_minutes=r["bin_minutes"],
            origin_hour=r["origin_hour"],
            stream=r["stream"],
        )
    )
    _write_series(sim, Path(r["out"]), _stamp(r))
    click.echo(f"simulated {sim.total_events()} events over {sim.n_bins} bins")


_FORECAST_DEFAULTS = {
    "params": None,
    "history": None,
    "horizon_bins": None,
    "n_sims": 100,
    "p_alarm": None,  # default: alarm fraction estimated from the history
    "seed": 0,
    "out": None,
}


@main.command("forecast")
@click.option("--config", type=click.Path(exists=True), default=None)
@click.option("--params", type=click.Path(exists=True), default=None)
@click.option("--history", type=click.Path(exists=True), default=None)
@click.option("--horizon-bins", type=int, default=None)
@click.option("--n-sims", type=int, default=None)
@click.option("--p-alarm", type=float, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(), default=None)
@_guard
def forecast_cmd(config, **flags):
    """Simulate per-ward count distributions over a forecast horizon."""
    r = _resolve("forecast", config, _FORECAST_DEFAULTS, flags)
    params = _load_params(r["params"])
    history = _read_series(r["history"])
    if r["p_alarm"] is None:
        r["p_alarm"] = estimate_alarm_prob(history)
    result = run_forecast(
        params, history, r["horizon_bins"], r["n_sims"], r["p_alarm"], seed=r["seed"]
    )
    stamp = _stamp(r)
    out = Path(r["out"])
    out.mkdir(parents=True, exist_ok=True)
    labels = history.labels or tuple(str(m) for m in range(history.dims))
    _write_csv(
        out / "forecast.csv",
        stamp,
        ["ward", "mean", "lower95", "upper95"],
        [
            (labels[m], result.mean[m], result.lower95[m], result.upper95[m])
            for m in range(history.dims)
        ],
    )
    _write_csv(
        out / "totals.csv",
        stamp,
        ["sim"] + list(labels),
        [(i, *result.totals[i]) for i in range(result.totals.shape[0])],
    )
    _write_json(
        out / "forecast.json",
        {
            "horizon_bins": result.horizon_bins,
            "n_sims": r["n_sims"],
            "p_alarm": r["p_alarm"],
            "mean": result.mean.tolist(),
            "lower95": result.lower95.tolist(),
            "upper95": result.upper95.tolist(),
            **stamp,
        },
    )
    click.echo(f"forecast means: {np.round(result.mean, 2).tolist()}")
    return result, labels


_EVAL_DEFAULTS = {
    "params": None,
    "history": None,
    "test": None,
    "n_sims": 10,
    "bin_hours": 4.0,
    "p_alarm": None,
    "seed": 0,
    "interarrival": True,
    "out": None,
}


def _eval_options(fn):
    for opt in reversed(
        [
            click.option("--config", type=click.Path(exists=True), default=None),
            click.option("--params", type=click.Path(exists=True), default=None),
            click.option("--history", type=click.Path(exists=True), default=None),
            click.option("--test", type=click.Path(exists=True), default=None),
            click.option("--n-sims", type=int, default=None),
            click.option("--bin-hours", type=float, default=None),
            click.option("--p-alarm", type=float, default=None),
            click.option("--seed", type=int, default=None),
            click.option("--interarrival/--no-interarrival", default=None),
            click.option("--out", type=click.Path(), default=None),
        ]
    ):
        fn = opt(fn)
    return fn


def _run_evaluation(command: str, config, flags, defaults=None) -> tuple[dict, dict, Path]:
    r = _resolve(command, config, defaults or _EVAL_DEFAULTS, flags)
    params = _load_params(r["params"])
    history = _read_series(r["history"])
    test = _read_series(r["test"])
    if r["p_alarm"] is None:
        r["p_alarm"] = estimate_alarm_prob(history)
    stamp = _stamp(r)
    out = Path(r["out"])
    out.mkdir(parents=True, exist_ok=True)
    labels = test.labels or tuple(str(m) for m in range(test.dims))

    score = predictive_loglik(params, history, test)
    _write_csv(
        out / "predictive.csv",
        stamp,
        ["ward", "predictive_loglik"],
        [(labels[m], score.per_ward[m]) for m in range(test.dims)]
        + [("overall", score.overall)],
    )

    trig = None
    if test.n_event_bins() > 0:
        trig = triggering_report(params, test)
        _write_csv(
            out / "triggering.csv",
            stamp,
            ["component", "share"],
            [
                ("background", trig.avg_background),
                ("nonalarm", trig.avg_nonalarm),
                ("alarm", trig.avg_alarm),
                ("nonalarm_self", trig.nonalarm_self),
                ("nonalarm_cross", trig.nonalarm_cross),
                ("alarm_self", trig.alarm_self),
                ("alarm_cross", trig.alarm_cross),
            ],
        )
        _write_csv(
            out / "triggering_events.csv",
            stamp,
            ["ward", "bin", "background", "nonalarm_self", "nonalarm_cross", "alarm_self", "alarm_cross"],
            [tuple(row) for row in trig.per_event],
        )

    hist = None
    if r["interarrival"] and test.n_event_bins() > 0:
        hist = interarrival_check(
            params,
            test,
            n_sims=r["n_sims"],
            bin_hours=r["bin_hours"],
            history=history,
            p_alarm=r["p_alarm"],
            seed=r["seed"],
        )
        _write_csv(
            out / "interarrival.csv",
            stamp,
            ["bucket_start_hours", "simulated_mean", "band_2sd", "observed"],
            [
                (hist.edges_hours[i], hist.mean_props[i], hist.band2sd[i], hist.observed_props[i])
                for i in range(hist.edges_hours.size)
            ],
        )

    _write_json(
        out / "evaluation.json",
        {
            "predictive_loglik": {
                "per_ward": score.per_ward.tolist(),
                "overall": score.overall,
                "n_test_bins": score.n_test_bins,
            },
            "triggering": None
            if trig is None
            else {
                "background": trig.avg_background,
                "nonalarm": trig.avg_nonalarm,
                "alarm": trig.avg_alarm,
            },
            "p_alarm": r["p_alarm"],
            **stamp,
        },
    )
    results = {"score": score, "triggering": trig, "interarrival": hist, "labels": labels}
    return r, results, out


@main.command()
@_eval_options
@_guard
def evaluate(config, **flags):
    """Score held-out data: predictive log-likelihood, triggering shares and
    the interarrival calibration table."""
    _, results, out = _run_evaluation("evaluate", config, flags)
    score = results["score"]
    click.echo(f"predictive log-likelihood {score.overall:.6f} over {score.n_test_bins} bins")


_REPORT_DEFAULTS = dict(_EVAL_DEFAULTS, horizon_bins=0, forecast_sims=100)


@main.command("report")
@_eval_options
@click.option("--horizon-bins", type=int, default=None, help="forecast horizon; 0 skips the forecast figure")
@click.option("--forecast-sims", type=int, default=None)
@_guard
def report_cmd(config, **flags):
    """Run the evaluation and render its figures next to the CSV output."""
    from . import plots

    r, results, out = _run_evaluation("report", config, flags, defaults=_REPORT_DEFAULTS)
    if results["triggering"] is not None:
        plots.plot_triggering(results["triggering"], out / "triggering.png")
    if results["interarrival"] is not None:
        plots.plot_interarrival(results["interarrival"], out / "interarrival.png")
    if r["horizon_bins"] > 0:
        params = _load_params(r["params"])
        history = _read_series(r["history"])
        fc = run_forecast(
            params,
            history,
            r["horizon_bins"],
            r["forecast_sims"],
            r["p_alarm"],
            seed=r["seed"],
        )
        stamp = _stamp(r)
        labels = results["labels"]
        _write_csv(
            out / "forecast.csv",
            stamp,
            ["ward", "mean", "lower95", "upper95"],
            [(labels[m], fc.mean[m], fc.lower95[m], fc.upper95[m]) for m in range(len(labels))],
        )
        plots.plot_forecast(fc, out / "forecast.png", labels=labels)
    click.echo(f"report written under {out}")


_BENCH_DEFAULTS = {
    "n_bins": 50_000,
    "base_events": 500,
    "scale": 10,
    "seed": 0,
    "out": "",
}


@main.command()
@click.option("--config", type=click.Path(exists=True), default=None)
@click.option("--n-bins", type=int, default=None)
@click.option("--base-events", type=int, default=None)
@click.option("--scale", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(), default=None)
@_guard
def benchmark(config, **flags):
    """Time the recursive versus naive likelihood as event count scales at
    fixed grid length (soft complexity evidence, reported not asserted)."""
    r = _resolve("benchmark", config, _BENCH_DEFAULTS, flags)
    rng = np.random.default_rng(r["seed"])
    params = MarkedParams(
        mu=[0.01, 0.01], K=[[0.2, 0.05], [0.05, 0.2]], alpha=[[0.1, 0.0], [0.0, 0.1]], beta=0.3
    )

    def synthetic(n_events: int) -> BinnedSeries:
        bins_c, counts_c, alarms_c = [], [], []
        for _ in range(2):
            b = np.sort(rng.choice(np.arange(1, r["n_bins"] + 1), size=n_events, replace=False))
            bins_c.append(b)
            counts_c.append(np.ones(n_events, dtype=np.int64))
            alarms_c.append(rng.random(n_events) < 0.2)
        return BinnedSeries(
            dims=2,
            n_bins=r["n_bins"],
            bins=tuple(bins_c),
            counts=tuple(counts_c),
            alarms=tuple(alarms_c),
        )

    def clock(fn, series) -> float:
        fn(params, series)  # warm any lazy compilation before timing
        t0 = time.perf_counter()
        fn(params, series)
        return time.perf_counter() - t0

    rows = []
    for n_events in (r["base_events"], r["base_events"] * r["scale"]):
        series = synthetic(n_events)
        rows.append(
            (
                n_events,
                clock(loglik_recursive, series),
                clock(loglik_naive, series),
            )
        )
    rec_ratio = rows[1][1] / rows[0][1]
    naive_ratio = rows[1][2] / rows[0][2]
    if r["out"]:
        _write_csv(
            Path(r["out"]),
            _stamp(r),
            ["n_events", "recursive_seconds", "naive_seconds"],
            rows,
        )
    click.echo(
        f"event count x{r['scale']}: recursive time x{rec_ratio:.2f}, "
        f"naive grid time x{naive_ratio:.2f}"
    )
    if rec_ratio > 1.2 * r["scale"]:
        click.echo("warning: recursive evaluator scaled worse than expected", err=True)


if __name__ == "__main__":
    main()
