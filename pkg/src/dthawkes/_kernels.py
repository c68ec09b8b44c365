"""Compiled inner loops for the intensity, likelihood and gradient engines.

Every kernel works on the merged event timeline: ``ubins`` is the sorted
array of distinct bins holding at least one event in any dimension, with
dense per-dimension counts ``cnt`` (n_u, M) and alarm flags ``alm``.
Geometric decay composes multiplicatively across the gaps between merged
bins, so one state vector per source dimension reproduces the per-pair
recursions exactly.
"""

from __future__ import annotations

import numpy as np
from numba import njit


# ---------------------------------------------------------------------------
# marked model (shared beta, alarm mark, seasonal background)
# ---------------------------------------------------------------------------


@njit(cache=True)
def marked_event_intensities(ubins, cnt, alm, s_ev, mu, K, alpha, beta):
    """Intensity at every distinct event bin for every target dimension,
    via the R / R_a recursion advanced across the merged timeline."""
    n_u = ubins.shape[0]
    M = mu.shape[0]
    lam = np.empty((n_u, M))
    R = np.zeros(M)
    Ra = np.zeros(M)
    omb = 1.0 - beta
    for k in range(n_u):
        for m in range(M):
            acc = mu[m] * s_ev[k]
            for l in range(M):
                acc += K[l, m] * R[l] + alpha[l, m] * Ra[l]
            lam[k, m] = acc
        if k + 1 < n_u:
            gap = ubins[k + 1] - ubins[k]
            dec = omb ** gap
            kick = beta * omb ** (gap - 1)
            for l in range(M):
                R[l] = dec * R[l] + cnt[k, l] * kick
                Ra[l] = dec * Ra[l] + (cnt[k, l] * kick if alm[k, l] else 0.0)
    return lam


@njit(cache=True)
def marked_naive_event_intensities(ubins, cnt, alm, s_ev, mu, K, alpha, beta):
    """Intensity at every distinct event bin by literal summation over all
    strictly earlier events (the quadratic form of the defining equation)."""
    n_u = ubins.shape[0]
    M = mu.shape[0]
    lam = np.empty((n_u, M))
    omb = 1.0 - beta
    for k in range(n_u):
        t = ubins[k]
        for m in range(M):
            acc = mu[m] * s_ev[k]
            for j in range(k):
                g = beta * omb ** (t - ubins[j] - 1)
                for l in range(M):
                    f = K[l, m] + (alpha[l, m] if alm[j, l] else 0.0)
                    acc += cnt[j, l] * f * g
            lam[k, m] = acc
    return lam


@njit(cache=True)
def marked_naive_grid_loglik(n_bins, ubins, cnt, alm, s_grid, mu, K, alpha, beta):
    """Grid-sum log-likelihood: sum over every bin t and dimension m of
    Y log(lambda) - lambda, each lambda by direct summation."""
    n_u = ubins.shape[0]
    M = mu.shape[0]
    total = 0.0
    ptr = 0  # index of first merged bin >= t
    for t in range(1, n_bins + 1):
        while ptr < n_u and ubins[ptr] < t:
            ptr += 1
        for m in range(M):
            lam = mu[m] * s_grid[t - 1]
            for j in range(ptr):
                g = beta * (1.0 - beta) ** (t - ubins[j] - 1)
                for l in range(M):
                    f = K[l, m] + (alpha[l, m] if alm[j, l] else 0.0)
                    lam += cnt[j, l] * f * g
            y = 0
            if ptr < n_u and ubins[ptr] == t:
                y = cnt[ptr, m]
            if y > 0:
                if lam < 1e-300:
                    return -np.inf
                total += y * np.log(lam)
            total -= lam
    return total


@njit(cache=True)
def marked_grid_intensities(n_bins, ubins, cnt, alm, s_grid, mu, K, alpha, beta):
    """Intensity at every bin of the grid via the per-bin R^3 recursion."""
    n_u = ubins.shape[0]
    M = mu.shape[0]
    lam = np.empty((n_bins, M))
    R3 = np.zeros(M)
    R3a = np.zeros(M)
    omb = 1.0 - beta
    ptr = 0
    for t in range(1, n_bins + 1):
        for m in range(M):
            acc = mu[m] * s_grid[t - 1]
            for l in range(M):
                acc += K[l, m] * R3[l] + alpha[l, m] * R3a[l]
            lam[t - 1, m] = acc
        for l in range(M):
            R3[l] = omb * R3[l]
            R3a[l] = omb * R3a[l]
        if ptr < n_u and ubins[ptr] == t:
            for l in range(M):
                R3[l] += cnt[ptr, l] * beta
                if alm[ptr, l]:
                    R3a[l] += cnt[ptr, l] * beta
            ptr += 1
    return lam


@njit(cache=True)
def marked_recursive_gradient_event_part(ubins, cnt, alm, s_ev, mu, K, alpha, beta):
    """Event-bin contributions to the gradient in one merged pass,
    maintaining R, R_a and the beta companions R1, R1_a, R2, R2_a."""
    n_u = ubins.shape[0]
    M = mu.shape[0]
    d_mu = np.zeros(M)
    d_K = np.zeros((M, M))
    d_alpha = np.zeros((M, M))
    d_beta = 0.0
    R = np.zeros(M)
    Ra = np.zeros(M)
    R1 = np.zeros(M)
    R1a = np.zeros(M)
    R2 = np.zeros(M)
    R2a = np.zeros(M)
    omb = 1.0 - beta
    ok = True
    for k in range(n_u):
        for m in range(M):
            y = cnt[k, m]
            if y == 0:
                continue
            lam = mu[m] * s_ev[k]
            for l in range(M):
                lam += K[l, m] * R[l] + alpha[l, m] * Ra[l]
            if lam < 1e-300:
                ok = False
                lam = 1e-300
            w = y / lam
            d_mu[m] += w * s_ev[k]
            for p in range(M):
                d_K[p, m] += w * R[p]
                d_alpha[p, m] += w * Ra[p]
                d_beta += w * (K[p, m] * (R1[p] - R2[p]) + alpha[p, m] * (R1a[p] - R2a[p]))
        if k + 1 < n_u:
            gap = ubins[k + 1] - ubins[k]
            dec = omb ** gap
            kick = beta * omb ** (gap - 1)
            kick1 = omb ** (gap - 2)
            for l in range(M):
                y = cnt[k, l]
                r1 = dec * R1[l] + y * kick1
                R2[l] = beta * gap * r1 + dec * R2[l]
                R1[l] = r1
                R[l] = dec * R[l] + y * kick
                ya = y if alm[k, l] else 0
                r1a = dec * R1a[l] + ya * kick1
                R2a[l] = beta * gap * r1a + dec * R2a[l]
                R1a[l] = r1a
                Ra[l] = dec * Ra[l] + ya * kick
    return d_mu, d_K, d_alpha, d_beta, ok


@njit(cache=True)
def marked_naive_gradient_event_part(ubins, cnt, alm, s_ev, mu, K, alpha, beta):
    """Event-bin gradient contributions by literal double summation."""
    n_u = ubins.shape[0]
    M = mu.shape[0]
    d_mu = np.zeros(M)
    d_K = np.zeros((M, M))
    d_alpha = np.zeros((M, M))
    d_beta = 0.0
    omb = 1.0 - beta
    ok = True
    S = np.zeros(M)
    Sa = np.zeros(M)
    S1 = np.zeros(M)
    S1a = np.zeros(M)
    for k in range(n_u):
        t = ubins[k]
        for p in range(M):
            S[p] = 0.0
            Sa[p] = 0.0
            S1[p] = 0.0
            S1a[p] = 0.0
        for j in range(k):
            d = t - ubins[j]
            g = beta * omb ** (d - 1)
            dg = omb ** (d - 2) * (1.0 - beta * d)
            for p in range(M):
                S[p] += cnt[j, p] * g
                S1[p] += cnt[j, p] * dg
                if alm[j, p]:
                    Sa[p] += cnt[j, p] * g
                    S1a[p] += cnt[j, p] * dg
        for m in range(M):
            y = cnt[k, m]
            if y == 0:
                continue
            lam = mu[m] * s_ev[k]
            for l in range(M):
                lam += K[l, m] * S[l] + alpha[l, m] * Sa[l]
            if lam < 1e-300:
                ok = False
                lam = 1e-300
            w = y / lam
            d_mu[m] += w * s_ev[k]
            for p in range(M):
                d_K[p, m] += w * S[p]
                d_alpha[p, m] += w * Sa[p]
                d_beta += w * (K[p, m] * S1[p] + alpha[p, m] * S1a[p])
    return d_mu, d_K, d_alpha, d_beta, ok


# ---------------------------------------------------------------------------
# unmarked appendix model (per-pair decay, constant background)
# ---------------------------------------------------------------------------


@njit(cache=True)
def unmarked_event_intensities(ubins, cnt, mu, K, B):
    """Per-pair R(l, m) recursion across the merged timeline."""
    n_u = ubins.shape[0]
    M = mu.shape[0]
    lam = np.empty((n_u, M))
    R = np.zeros((M, M))
    for k in range(n_u):
        for m in range(M):
            acc = mu[m]
            for l in range(M):
                acc += K[l, m] * R[l, m]
            lam[k, m] = acc
        if k + 1 < n_u:
            gap = ubins[k + 1] - ubins[k]
            for l in range(M):
                for m in range(M):
                    omb = 1.0 - B[l, m]
                    R[l, m] = omb ** gap * R[l, m] + cnt[k, l] * B[l, m] * omb ** (gap - 1)
    return lam


@njit(cache=True)
def unmarked_naive_event_intensities(ubins, cnt, mu, K, B):
    n_u = ubins.shape[0]
    M = mu.shape[0]
    lam = np.empty((n_u, M))
    for k in range(n_u):
        t = ubins[k]
        for m in range(M):
            acc = mu[m]
            for j in range(k):
                for l in range(M):
                    b = B[l, m]
                    acc += cnt[j, l] * K[l, m] * b * (1.0 - b) ** (t - ubins[j] - 1)
            lam[k, m] = acc
    return lam


@njit(cache=True)
def unmarked_naive_grid_loglik(n_bins, ubins, cnt, mu, K, B):
    n_u = ubins.shape[0]
    M = mu.shape[0]
    total = 0.0
    ptr = 0
    for t in range(1, n_bins + 1):
        while ptr < n_u and ubins[ptr] < t:
            ptr += 1
        for m in range(M):
            lam = mu[m]
            for j in range(ptr):
                for l in range(M):
                    b = B[l, m]
                    lam += cnt[j, l] * K[l, m] * b * (1.0 - b) ** (t - ubins[j] - 1)
            y = 0
            if ptr < n_u and ubins[ptr] == t:
                y = cnt[ptr, m]
            if y > 0:
                if lam < 1e-300:
                    return -np.inf
                total += y * np.log(lam)
            total -= lam
    return total


@njit(cache=True)
def unmarked_grid_intensities(n_bins, ubins, cnt, mu, K, B):
    """Per-bin R^3(t, l, m) recursion over the whole grid."""
    n_u = ubins.shape[0]
    M = mu.shape[0]
    lam = np.empty((n_bins, M))
    R3 = np.zeros((M, M))
    ptr = 0
    for t in range(1, n_bins + 1):
        for m in range(M):
            acc = mu[m]
            for l in range(M):
                acc += K[l, m] * R3[l, m]
            lam[t - 1, m] = acc
        for l in range(M):
            for m in range(M):
                R3[l, m] *= 1.0 - B[l, m]
        if ptr < n_u and ubins[ptr] == t:
            for l in range(M):
                for m in range(M):
                    R3[l, m] += cnt[ptr, l] * B[l, m]
            ptr += 1
    return lam


@njit(cache=True)
def unmarked_recursive_gradient_event_part(ubins, cnt, mu, K, B):
    """Event-bin gradient contributions with per-pair R, R1, R2 states."""
    n_u = ubins.shape[0]
    M = mu.shape[0]
    d_mu = np.zeros(M)
    d_K = np.zeros((M, M))
    d_B = np.zeros((M, M))
    R = np.zeros((M, M))
    R1 = np.zeros((M, M))
    R2 = np.zeros((M, M))
    ok = True
    for k in range(n_u):
        for m in range(M):
            y = cnt[k, m]
            if y == 0:
                continue
            lam = mu[m]
            for l in range(M):
                lam += K[l, m] * R[l, m]
            if lam < 1e-300:
                ok = False
                lam = 1e-300
            w = y / lam
            d_mu[m] += w
            for p in range(M):
                d_K[p, m] += w * R[p, m]
                d_B[p, m] += w * K[p, m] * (R1[p, m] - R2[p, m])
        if k + 1 < n_u:
            gap = ubins[k + 1] - ubins[k]
            for l in range(M):
                y = cnt[k, l]
                for m in range(M):
                    b = B[l, m]
                    omb = 1.0 - b
                    dec = omb ** gap
                    r1 = dec * R1[l, m] + y * omb ** (gap - 2)
                    R2[l, m] = b * gap * r1 + dec * R2[l, m]
                    R1[l, m] = r1
                    R[l, m] = dec * R[l, m] + y * b * omb ** (gap - 1)
    return d_mu, d_K, d_B, ok
