"""Primitive stochastic procedures: samplers, log-densities and supports.

Discrete draws come back as floats so they mix freely with arithmetic;
``bernoulli``/``flip`` return booleans so they can drive ``if``.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence, Tuple

__all__ = [
    "DistributionDomainError", "DistributionKind", "Family", "FAMILIES",
    "make_kind", "sample", "log_pdf", "support_values", "sample_poisson", "sample_gamma",
    "sample_beta",
]

NEG_INF = float("-inf")
_LOG_2PI = math.log(2.0 * math.pi)


class DistributionDomainError(ValueError):
    pass


@dataclass(frozen=True)
class Family:
    name: str
    arity: int
    discrete: bool
    check: Callable[[Tuple[float, ...]], None]
    draw: Callable[[Tuple[float, ...], random.Random], object]
    logp: Callable[[Tuple[float, ...], object], float]
    support: Optional[Callable[[Tuple[float, ...]], Sequence]] = None


@dataclass(frozen=True)
class DistributionKind:
    """A family together with concrete parameters."""

    name: str
    params: Tuple[float, ...]

    @property
    def family(self) -> Family:
        return FAMILIES[self.name]

    @property
    def support(self) -> str:
        return "discrete" if self.family.discrete else "continuous"

    def __str__(self):
        return f"{self.name}({', '.join(repr(p) for p in self.params)})"


def _num(x, what):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise DistributionDomainError(f"{what} must be a number, got {x!r}")
    if not math.isfinite(x):
        raise DistributionDomainError(f"{what} must be finite, got {x!r}")
    return float(x)


def _is_int(x) -> bool:
    return not isinstance(x, bool) and isinstance(x, (int, float)) and float(x).is_integer()


# -- parameter checks ---------------------------------------------------------

def _check_bernoulli(p):
    if not 0.0 <= p[0] <= 1.0:
        raise DistributionDomainError(f"bernoulli needs p in [0, 1], got {p[0]}")


def _check_normal(p):
    if not p[1] > 0.0:
        raise DistributionDomainError(f"normal needs a positive standard deviation, got {p[1]}")


def _check_gamma(p):
    if not (p[0] > 0.0 and p[1] > 0.0):
        raise DistributionDomainError(f"gamma needs shape > 0 and rate > 0, got {p}")


def _check_beta(p):
    if not (p[0] > 0.0 and p[1] > 0.0):
        raise DistributionDomainError(f"beta needs a > 0 and b > 0, got {p}")


def _check_uc(p):
    if not p[0] < p[1]:
        raise DistributionDomainError(f"uniform-continuous needs a < b, got {p}")


def _check_ud(p):
    if not (_is_int(p[0]) and _is_int(p[1]) and p[0] <= p[1]):
        raise DistributionDomainError(f"uniform-discrete needs integers a <= b, got {p}")


def _check_poisson(p):
    if not p[0] > 0.0:
        raise DistributionDomainError(f"poisson needs rate > 0, got {p[0]}")


# -- samplers -----------------------------------------------------------------

# Above this shape the gamma's relative spread 1/sqrt(k) is below double
# precision, and the stdlib sampler overflows near the float maximum.
_GAMMA_POINT_MASS = 2.0 ** 106


def sample_gamma(shape: float, scale: float, rng: random.Random) -> float:
    if shape > _GAMMA_POINT_MASS:
        return shape * scale
    return rng.gammavariate(shape, scale)


def sample_beta(a: float, b: float, rng: random.Random) -> float:
    # same draws as random.betavariate, without the overflow in y + z
    y = sample_gamma(a, 1.0, rng)
    if not y:
        return 0.0
    z = sample_gamma(b, 1.0, rng)
    t = y + z
    return y / t if t != math.inf else 1.0 / (1.0 + z / y)


def sample_poisson(lam: float, rng: random.Random) -> int:
    """Poisson variate: multiplication method for small rates, PTRS otherwise."""
    if lam < 30.0:
        limit = math.exp(-lam)
        k, prod = 0, rng.random()
        while prod > limit:
            k += 1
            prod *= rng.random()
        return k
    # Hormann's transformed rejection with squeeze
    slam = math.sqrt(lam)
    loglam = math.log(lam)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    invalpha = 1.1239 + 1.1328 / (b - 3.4)
    vr = 0.9277 - 3.6224 / (b - 2.0)
    while True:
        u = rng.random() - 0.5
        v = rng.random()
        us = 0.5 - abs(u)
        k = math.floor((2.0 * a / us + b) * u + lam + 0.43)
        if us >= 0.07 and v <= vr:
            return k
        if k < 0 or (us < 0.013 and v > us):
            continue
        if (math.log(v) + math.log(invalpha) - math.log(a / (us * us) + b)
                <= -lam + k * loglam - math.lgamma(k + 1)):
            return k


def _draw_uc(p, rng):
    a, b = p
    u = rng.random()
    w = b - a
    # the width overflows only for endpoints of opposite sign near the float limit
    x = a + w * u if w != math.inf else a * (1.0 - u) + b * u
    return min(max(x, a), b)


# -- log densities ------------------------------------------------------------

def _logp_bernoulli(p, x):
    if isinstance(x, bool):
        hit = x
    elif _is_int(x) and x in (0, 1):
        hit = x == 1
    else:
        return NEG_INF
    q = p[0] if hit else 1.0 - p[0]
    return math.log(q) if q > 0.0 else NEG_INF


def _logp_normal(p, x):
    if not _is_real(x):
        return NEG_INF
    m, s = p
    z = (x - m) / s
    return -0.5 * z * z - math.log(s) - 0.5 * _LOG_2PI


def _logp_gamma(p, x):
    if not _is_real(x) or x < 0.0:
        return NEG_INF
    shape, rate = p
    if x == 0.0:
        if shape == 1.0:
            return math.log(rate)
        return float("inf") if shape < 1.0 else NEG_INF
    return shape * math.log(rate) + (shape - 1.0) * math.log(x) - rate * x - math.lgamma(shape)


def _logp_beta(p, x):
    if not _is_real(x) or not 0.0 <= x <= 1.0:
        return NEG_INF
    a, b = p
    log_norm = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
    if x == 0.0:
        return log_norm if a == 1.0 else (float("inf") if a < 1.0 else NEG_INF)
    if x == 1.0:
        return log_norm if b == 1.0 else (float("inf") if b < 1.0 else NEG_INF)
    return log_norm + (a - 1.0) * math.log(x) + (b - 1.0) * math.log1p(-x)


def _logp_uc(p, x):
    a, b = p
    if not _is_real(x) or not a <= x <= b:
        return NEG_INF
    return -math.log(b - a)


def _logp_ud(p, x):
    a, b = p
    if not _is_int(x) or not a <= x <= b:
        return NEG_INF
    return -math.log(b - a + 1.0)


def _logp_poisson(p, x):
    lam = p[0]
    if not _is_int(x) or x < 0:
        return NEG_INF
    return x * math.log(lam) - lam - math.lgamma(x + 1.0)


def _is_real(x) -> bool:
    return not isinstance(x, bool) and isinstance(x, (int, float))


FAMILIES: Dict[str, Family] = {}


def _register(f: Family, *aliases: str):
    FAMILIES[f.name] = f
    for a in aliases:
        FAMILIES[a] = f


_register(Family("bernoulli", 1, True, _check_bernoulli,
                 lambda p, rng: rng.random() < p[0], _logp_bernoulli,
                 lambda p: (True, False)), "flip")
_register(Family("normal", 2, False, _check_normal,
                 lambda p, rng: rng.normalvariate(p[0], p[1]), _logp_normal))
_register(Family("gamma", 2, False, _check_gamma,
                 lambda p, rng: sample_gamma(p[0], 1.0 / p[1], rng), _logp_gamma))
_register(Family("beta", 2, False, _check_beta,
                 lambda p, rng: sample_beta(p[0], p[1], rng), _logp_beta))
_register(Family("uniform-continuous", 2, False, _check_uc, _draw_uc, _logp_uc))
_register(Family("uniform-discrete", 2, True, _check_ud,
                 lambda p, rng: float(rng.randint(int(p[0]), int(p[1]))), _logp_ud,
                 lambda p: [float(k) for k in range(int(p[0]), int(p[1]) + 1)]))
_register(Family("poisson", 1, True, _check_poisson,
                 lambda p, rng: float(sample_poisson(p[0], rng)), _logp_poisson))


def make_kind(name: str, params: Sequence) -> DistributionKind:
    """Validate ``params`` against family ``name`` and bundle them."""
    try:
        fam = FAMILIES[name]
    except KeyError:
        raise DistributionDomainError(f"unknown distribution {name!r}") from None
    if len(params) != fam.arity:
        raise DistributionDomainError(
            f"{fam.name} takes {fam.arity} parameter(s), got {len(params)}")
    values = tuple(_num(x, f"{fam.name} parameter") for x in params)
    fam.check(values)
    return DistributionKind(fam.name, values)


def sample(d: DistributionKind, rng: random.Random):
    return d.family.draw(d.params, rng)


def log_pdf(d: DistributionKind, x) -> float:
    """Natural-log density (continuous) or mass (discrete); -inf off support."""
    return d.family.logp(d.params, x)


def support_values(d: DistributionKind) -> Optional[Sequence]:
    """Finite support as a sequence, or None when the support is infinite/continuous."""
    sup = d.family.support
    return None if sup is None else sup(d.params)
