"""Acceptance gate: twelve end-to-end criteria, each printing one
PASS/FAIL line with its measured quantity and runtime."""

import math
import sys
import time

import numpy as np
import pytest
from click.testing import CliRunner

from dthawkes import (
    BinnedSeries,
    FitConfig,
    MarkedParams,
    SeasonalProfile,
    UnmarkedParams,
    fit,
    grad_naive,
    grad_recursive,
    loglik_event_form,
    loglik_naive,
    loglik_recursive,
    predictive_loglik,
    simulate_naive,
    simulate_recursive,
    triggering_report,
    u_grad,
    u_loglik,
    u_simulate,
)
from dthawkes.cli import main as cli_main
from dthawkes.estimator import FitReport
from dthawkes.evaluator import poisson_loglik_full
from dthawkes.gradient import check_gradient
from dthawkes.likelihood import ridge_penalty
from dthawkes.oracles import oracle_branching_mean
from dthawkes.simulator import SimConfig

from conftest import random_params, sparse_series

_CAPMAN = None


@pytest.fixture(autouse=True)
def _grab_capture_manager(request):
    global _CAPMAN
    _CAPMAN = request.config.pluginmanager.getplugin("capturemanager")
    yield


def _report(number: int, description: str, ok: bool, detail: str, elapsed: float) -> None:
    verdict = "PASS" if ok else "FAIL"
    line = f"ACCEPTANCE {number:02d} [{verdict}] {description}: {detail} ({elapsed:.1f}s)"
    if _CAPMAN is not None:
        # suspend capture so the verdict line shows even on passing runs
        with _CAPMAN.global_and_fixture_disabled():
            print(line, file=sys.stderr, flush=True)
    else:
        print(line, file=sys.stderr, flush=True)
    assert ok, f"criterion {number}: {description}: {detail}"


def _series_equal(a: BinnedSeries, b: BinnedSeries) -> bool:
    return all(
        np.array_equal(a.bins[m], b.bins[m])
        and np.array_equal(a.counts[m], b.counts[m])
        and np.array_equal(a.alarms[m], b.alarms[m])
        for m in range(a.dims)
    )


def test_criterion_01_likelihood_three_way_identity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(200):
        M = int(rng.integers(1, 4))
        N = int(rng.integers(5, 501))
        params = random_params(rng, M)
        series = sparse_series(rng, M, N)
        a = loglik_naive(params, series).value
        b = loglik_event_form(params, series).value
        c = loglik_recursive(params, series).value
        scale = max(1.0, abs(a))
        worst = max(worst, abs(a - b) / scale, abs(a - c) / scale)
    elapsed = time.perf_counter() - t0
    _report(
        1,
        "three-way likelihood identity on 200 instances",
        worst <= 1e-9 and elapsed < 30,
        f"max rel discrepancy {worst:.2e}",
        elapsed,
    )


def test_criterion_02_hand_value():
    t0 = time.perf_counter()
    params = MarkedParams(mu=[0.1], K=[[1.0]], alpha=[[0.0]], beta=0.5)
    series = BinnedSeries(
        dims=1,
        n_bins=3,
        bins=(np.array([1, 3]),),
        counts=(np.array([2, 1]),),
        alarms=(np.array([False, False]),),
    )
    values = [
        ev(params, series).value for ev in (loglik_naive, loglik_event_form, loglik_recursive)
    ]
    worst = max(abs(v - (-6.915996)) for v in values)
    _report(
        2,
        "hand-computed log-likelihood -6.915996",
        worst <= 1e-6,
        f"max abs deviation {worst:.2e}",
        time.perf_counter() - t0,
    )


def test_criterion_03_gradient_exactness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(103)
    worst_pair = 0.0
    worst_fd = 0.0
    for i in range(100):
        M = int(rng.integers(1, 4))
        params = random_params(rng, M)
        series = sparse_series(rng, M, int(rng.integers(5, 120)))
        a = grad_naive(params, series).as_flat()
        b = grad_recursive(params, series).as_flat()
        worst_pair = max(worst_pair, float(np.max(np.abs(a - b) / (np.abs(a) + 1e-12))))
        lambda_h = 0.8 if i % 4 == 0 else 0.0  # every 4th checks the ridge objective
        worst_fd = max(worst_fd, check_gradient(params, series, lambda_h=lambda_h))
    elapsed = time.perf_counter() - t0
    _report(
        3,
        "gradient exactness (recursive vs naive vs finite differences)",
        worst_pair <= 1e-10 and worst_fd <= 1e-5 and elapsed < 60,
        f"pair {worst_pair:.2e}, FD {worst_fd:.2e}",
        elapsed,
    )


def test_criterion_04_seeded_simulator_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(104)
    ok = True
    for i in range(50):
        M = int(rng.integers(1, 4))
        params = random_params(rng, M)
        cfg = SimConfig(
            n_bins=150,
            p_alarm=float(rng.uniform(0, 1)),
            seed=int(rng.integers(1e9)),
            params=params,
        )
        ok = ok and _series_equal(simulate_naive(cfg), simulate_recursive(cfg))
        uparams = UnmarkedParams(
            mu=rng.uniform(0.05, 0.3, M),
            K=rng.uniform(0.0, 0.3 / M, (M, M)),
            B=rng.uniform(0.1, 0.9, (M, M)),
        )
        ua = u_simulate(uparams, 150, seed=i, mode="naive")
        ub = u_simulate(uparams, 150, seed=i, mode="recursive")
        ok = ok and _series_equal(ua, ub)
    elapsed = time.perf_counter() - t0
    _report(
        4,
        "seeded naive/recursive simulators bit-identical on 50 configs",
        ok and elapsed < 30,
        "all identical" if ok else "mismatch found",
        elapsed,
    )


def test_criterion_05_branching_means():
    t0 = time.perf_counter()
    n = 1_000_000
    # unmarked M=1: mu=0.1, K=0.5 -> stationary mean 0.2
    usim = u_simulate(UnmarkedParams(mu=[0.1], K=[[0.5]], B=[[0.5]]), n, seed=42)
    mean_u = usim.counts[0].sum() / n
    # stationary count variance inflates by (1 - r)^-2 under branching ratio r
    se_u = math.sqrt(0.2 / (1 - 0.5) ** 2 / n)
    ok_u = abs(mean_u - 0.2) <= 3 * se_u

    # marked, alarm-augmented: mu / (1 - K - p * alpha)
    params = MarkedParams(mu=[0.1], K=[[0.3]], alpha=[[0.4]], beta=0.3)
    p_alarm = 0.25
    expected = oracle_branching_mean(params.mu, params.K, params.alpha, p_alarm)[0]
    msim = simulate_recursive(SimConfig(n_bins=n, p_alarm=p_alarm, seed=43, params=params))
    mean_m = msim.counts[0].sum() / n
    r = 0.3 + p_alarm * 0.4
    se_m = math.sqrt(expected / (1 - r) ** 2 / n)
    ok_m = abs(mean_m - expected) <= 3 * se_m
    elapsed = time.perf_counter() - t0
    _report(
        5,
        "long-run means match branching fixed points over 1e6 bins",
        ok_u and ok_m and elapsed < 60,
        f"unmarked {mean_u:.4f} vs 0.2000, marked {mean_m:.4f} vs {expected:.4f}",
        elapsed,
    )


def test_criterion_06_parameter_recovery():
    t0 = time.perf_counter()
    truth = MarkedParams(
        mu=[0.02, 0.03],
        K=[[0.3, 0.1], [0.05, 0.25]],
        alpha=[[0.2, 0.05], [0.1, 0.15]],
        beta=0.4,
    )
    season = SeasonalProfile.uniform()
    hits = 0
    for seed in range(10):
        series = simulate_recursive(
            SimConfig(n_bins=100_000, p_alarm=0.3, seed=seed, params=truth)
        )
        rep = fit(series, season, FitConfig(variant="MHPA", max_iters=3000, tol=1e-9))
        p = rep.params
        ok = (
            bool(np.all(np.abs(p.mu / truth.mu - 1) <= 0.15))
            and abs(p.beta / truth.beta - 1) <= 0.15
            and bool(np.all(np.abs(p.K / truth.K - 1) <= 0.25))
        )
        hits += ok
    elapsed = time.perf_counter() - t0
    _report(
        6,
        "MHPA recovery (mu, beta within 15%, K within 25%) on 1e5 bins",
        hits >= 8 and elapsed < 600,
        f"{hits}/10 seeds recovered",
        elapsed,
    )


def test_criterion_07_model_comparison_ordering():
    t0 = time.perf_counter()
    truth = MarkedParams(
        mu=[0.05, 0.08],
        K=[[0.35, 0.1], [0.05, 0.3]],
        alpha=[[0.2, 0.0], [0.0, 0.15]],
        beta=0.4,
    )
    season = SeasonalProfile.uniform()
    wins = 0
    for seed in range(20):
        full = simulate_recursive(SimConfig(n_bins=4000, p_alarm=0.3, seed=seed, params=truth))
        train = full.slice_bins(1, 3000)
        test = full.slice_bins(3001, 4000)
        score = {}
        for variant in ("MHPA", "IPP"):
            rep = fit(train, season, FitConfig(variant=variant, max_iters=1500))
            score[variant] = predictive_loglik(rep.params, train, test).overall
        wins += score["MHPA"] >= score["IPP"]
    elapsed = time.perf_counter() - t0
    _report(
        7,
        "fitted MHPA beats fitted IPP on held-out pLL",
        wins >= 18,
        f"{wins}/20 replications",
        elapsed,
    )


def test_criterion_08_triggering_structural_rows():
    t0 = time.perf_counter()
    rng = np.random.default_rng(108)
    series = sparse_series(rng, 2, 200)
    ipp = MarkedParams(mu=[0.2, 0.3], K=np.zeros((2, 2)), alpha=np.zeros((2, 2)), beta=0.5)
    rep_ipp = triggering_report(ipp, series)
    ok = (
        rep_ipp.avg_background == 1.0
        and rep_ipp.avg_nonalarm == 0.0
        and rep_ipp.avg_alarm == 0.0
    )
    for K in (np.diag([0.3, 0.2]), np.array([[0.3, 0.1], [0.05, 0.2]])):  # UHP, MHP shapes
        rep = triggering_report(
            MarkedParams(mu=[0.2, 0.3], K=K, alpha=np.zeros((2, 2)), beta=0.5), series
        )
        ok = ok and rep.avg_alarm == 0.0 and rep.alarm_self == 0.0 and rep.alarm_cross == 0.0
    _report(
        8,
        "structural triggering rows (IPP 100/0/0, alarm-free 0% alarm)",
        ok,
        "exact" if ok else "nonzero share found",
        time.perf_counter() - t0,
    )


def test_criterion_09_telescoping_identity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(109)
    worst = 0.0
    for _ in range(25):
        M = int(rng.integers(1, 4))
        params = random_params(rng, M)
        series = sparse_series(rng, M, int(rng.integers(40, 300)))
        cut = int(rng.integers(5, series.n_bins - 5))
        history = series.slice_bins(1, cut)
        test = series.slice_bins(cut + 1, series.n_bins)
        seq = predictive_loglik(params, history, test).overall
        tele = poisson_loglik_full(params, series) - poisson_loglik_full(params, history)
        worst = max(worst, abs(seq - tele) / max(1.0, abs(tele)))
    _report(
        9,
        "sequential pLL telescopes against full log-likelihoods",
        worst <= 1e-9,
        f"max rel discrepancy {worst:.2e}",
        time.perf_counter() - t0,
    )


def test_criterion_10_complexity_benchmark():
    t0 = time.perf_counter()
    runner = CliRunner()
    result = runner.invoke(
        cli_main,
        ["benchmark", "--n-bins", "50000", "--base-events", "500", "--scale", "10"],
    )
    ok = result.exit_code == 0
    detail = result.output.strip().splitlines()[-1] if result.output else "no output"
    # soft complexity assertion: the recursive evaluator must scale roughly
    # linearly in event count (the absolute naive/recursive gap is reported,
    # not asserted)
    if ok:
        rec_ratio = float(detail.split("recursive time x")[1].split(",")[0])
        ok = rec_ratio <= 18.0
    _report(
        10,
        "benchmark command reports complexity scaling at 5e4 bins",
        ok,
        detail,
        time.perf_counter() - t0,
    )


def test_criterion_11_shrinkage_monotonicity():
    t0 = time.perf_counter()
    truth = MarkedParams(
        mu=[0.05, 0.08],
        K=[[0.3, 0.08], [0.06, 0.25]],
        alpha=[[0.15, 0.05], [0.05, 0.1]],
        beta=0.4,
    )
    series = simulate_recursive(SimConfig(n_bins=5000, p_alarm=0.3, seed=11, params=truth))
    season = SeasonalProfile.uniform()
    grid = [0.0, 0.1, 0.5, 2.0, 10.0]
    penalties = []
    start = None
    for lh in grid:
        rep = fit(
            series,
            season,
            FitConfig(variant="MHPA", lambda_h=lh, max_iters=5000, tol=1e-10),
            start=start,
        )
        start = rep.params
        penalties.append(ridge_penalty(rep.params))
    monotone = all(b <= a + 1e-6 for a, b in zip(penalties, penalties[1:]))
    _report(
        11,
        "fitted ridge penalty non-increasing along the lambda grid",
        monotone,
        "penalties " + ", ".join(f"{p:.4f}" for p in penalties),
        time.perf_counter() - t0,
    )


def test_criterion_12_appendix_tying_consistency():
    t0 = time.perf_counter()
    rng = np.random.default_rng(112)
    M = 2
    mu = rng.uniform(0.05, 0.2, M)
    K = rng.uniform(0.0, 0.3, (M, M))
    beta = 0.45
    marked = MarkedParams(mu=mu, K=K, alpha=np.zeros((M, M)), beta=beta)
    tied = UnmarkedParams(mu=mu, K=K, B=np.full((M, M), beta))
    series = sparse_series(rng, M, 250)

    ll_gap = abs(
        u_loglik(tied, series).value - loglik_recursive(marked, series).value
    ) / max(1.0, abs(u_loglik(tied, series).value))
    d_mu, d_K, d_B = u_grad(tied, series)
    g = grad_recursive(marked, series)
    grad_gap = max(
        float(np.max(np.abs(d_mu - g.d_mu) / (np.abs(g.d_mu) + 1e-12))),
        float(np.max(np.abs(d_K - g.d_K) / (np.abs(g.d_K) + 1e-12))),
        abs(float(d_B.sum()) - g.d_beta) / (abs(g.d_beta) + 1e-12),
    )
    sim_marked = simulate_recursive(
        SimConfig(n_bins=300, p_alarm=0.0, seed=77, params=marked)
    )
    sim_tied = u_simulate(tied, 300, seed=77)
    sims_equal = _series_equal(
        sim_marked,
        BinnedSeries(
            dims=M,
            n_bins=300,
            bins=sim_tied.bins,
            counts=sim_tied.counts,
            alarms=sim_tied.alarms,
        ),
    )
    ok = ll_gap <= 1e-10 and grad_gap <= 1e-10 and sims_equal
    _report(
        12,
        "tied unmarked model reproduces the alarm-free marked model",
        ok,
        f"loglik gap {ll_gap:.2e}, grad gap {grad_gap:.2e}, sims {'equal' if sims_equal else 'differ'}",
        time.perf_counter() - t0,
    )
