"""Summary statistics and test p-values used as ABC distances."""
from __future__ import annotations

import math
from typing import NamedTuple, Sequence

import numpy as np

__all__ = [
    "Moments", "moments", "moment_log_penalty", "g_test_statistic", "g_test_p_value",
    "g_test_log_score", "ks_statistic", "kolmogorov_sf", "ks_two_sample_p_value",
    "LOG_SCORE_FLOOR",
]

LOG_SCORE_FLOOR = -1e9
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


class Moments(NamedTuple):
    mean: float
    variance: float
    skewness: float
    kurtosis: float
    degenerate: bool


def moments(xs: Sequence[float]) -> Moments:
    """Mean, sample variance (n-1), skewness and excess kurtosis.

    Skewness and kurtosis use the biased central moments m2, m3, m4; with
    zero spread they are reported as 0 and the result is flagged degenerate.
    """
    x = np.asarray(xs, dtype=float)
    n = x.size
    if n == 0:
        raise ValueError("moments of an empty sample")
    with np.errstate(over="ignore", invalid="ignore"):
        mean = float(x.mean())
        d = x - mean
        m2 = float(np.mean(d * d))
        var = float(np.sum(d * d) / (n - 1)) if n > 1 else 0.0
        if not math.isfinite(m2):
            return Moments(mean, math.inf, math.nan, math.nan, False)
        if not m2 > 0.0:
            return Moments(mean, var, 0.0, 0.0, True)
        # numpy scalars overflow to inf instead of raising
        m2_ = np.float64(m2)
        skew = float(np.mean(d ** 3) / m2_ ** 1.5)
        kurt = float(np.mean(d ** 4) / (m2_ * m2_) - 3.0)
    return Moments(mean, var, skew, kurt, False)


def moment_log_penalty(stats: Sequence[float], targets: Sequence[float], sigma: float) -> float:
    """Log-density of ``stats`` under a diagonal Gaussian centred on ``targets``."""
    if len(stats) != len(targets):
        raise ValueError("stats and targets differ in length")
    if not sigma > 0.0:
        raise ValueError("sigma must be positive")
    total = 0.0
    for s, t in zip(stats, targets):
        z = (s - t) / sigma
        total += -0.5 * z * z - math.log(sigma) - _HALF_LOG_2PI
    return total


def _binary_counts(xs) -> tuple:
    x = np.asarray(xs, dtype=float)
    if x.size == 0:
        raise ValueError("G-test needs a nonempty sample")
    ones = int(np.count_nonzero(x == 1.0))
    zeros = int(np.count_nonzero(x == 0.0))
    if ones + zeros != x.size:
        raise ValueError("G-test sample must be binary")
    return zeros, ones


def g_test_statistic(xs, theta: float) -> float:
    zeros, ones = _binary_counts(xs)
    n = zeros + ones
    g = 0.0
    for observed, p in ((ones, theta), (zeros, 1.0 - theta)):
        if observed:
            g += observed * math.log(observed / (p * n))
    return max(2.0 * g, 0.0)


def g_test_p_value(xs, theta: float) -> float:
    """Upper tail of chi-square(1) at the G statistic."""
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie strictly between 0 and 1")
    g = g_test_statistic(xs, theta)
    return min(1.0, math.erfc(math.sqrt(g / 2.0)))


def g_test_log_score(xs, theta: float, floor: float = LOG_SCORE_FLOOR) -> float:
    """ln p, the log-probability that a coin with bias p comes up true."""
    p = g_test_p_value(xs, theta)
    return max(math.log(p), floor) if p > 0.0 else floor


def ks_statistic(xs, ys) -> float:
    a = np.sort(np.asarray(xs, dtype=float))
    b = np.sort(np.asarray(ys, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValueError("KS test needs two nonempty samples")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def kolmogorov_sf(lam: float, tol: float = 1e-12) -> float:
    """P(K > lam) for the limiting Kolmogorov distribution."""
    if lam <= 0.0:
        return 1.0
    if lam < 1.0:
        # the alternating series converges slowly here; use the dual theta series for the cdf
        c = math.pi * math.pi / (8.0 * lam * lam)
        s, k = 0.0, 1
        while True:
            term = math.exp(-(2 * k - 1) ** 2 * c)
            s += term
            if term < tol:
                break
            k += 1
        p = 1.0 - math.sqrt(2.0 * math.pi) / lam * s
    else:
        s, k = 0.0, 1
        while True:
            term = math.exp(-2.0 * k * k * lam * lam)
            s += term if k % 2 else -term
            if term < tol:
                break
            k += 1
        p = 2.0 * s
    return min(1.0, max(0.0, p))


def ks_two_sample_p_value(xs, ys) -> float:
    d = ks_statistic(xs, ys)
    m, n = len(xs), len(ys)
    return kolmogorov_sf(d * math.sqrt(m * n / (m + n)))
