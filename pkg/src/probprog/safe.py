"""Total ("safe") versions of partial primitives.

Synthesised programs call these instead of the raw operations so that no
candidate can crash the search or leak a non-finite real.
"""
from __future__ import annotations

import math
import sys

_MAX = sys.float_info.max
BETA_EPS = 1e-6


def saturate(x: float) -> float:
    """Clamp infinities to the largest finite float; NaN becomes 0."""
    if x != x:
        return 0.0
    if x == math.inf:
        return _MAX
    if x == -math.inf:
        return -_MAX
    return x


def safe_log(a: float) -> float:
    return math.log(a) if a > 0.0 else 0.0


def safe_sqrt(a: float) -> float:
    return math.sqrt(a) if a >= 0.0 else math.sqrt(-a)


def safe_div(a: float, b: float) -> float:
    if b == 0.0:
        return 0.0
    try:
        return saturate(a / b)
    except OverflowError:
        return _MAX if (a > 0) == (b > 0) else -_MAX


def safe_exp(a: float) -> float:
    try:
        return math.exp(a)
    except OverflowError:
        return _MAX


# Parameter transforms for the stochastic wrappers.  Each returns either
# (family, params) or (None, value) for a degenerate point mass.

def safe_uc_params(a: float, b: float):
    if a == b:
        return None, a
    lo, hi = (a, b) if a < b else (b, a)
    return "uniform-continuous", (lo, hi)


def safe_normal_params(m: float, s: float):
    if s == 0.0:
        return None, m
    return "normal", (m, abs(s))


def safe_beta_params(a: float, b: float):
    return "beta", (max(a, BETA_EPS), max(b, BETA_EPS))
