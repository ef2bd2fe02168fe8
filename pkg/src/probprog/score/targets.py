"""Target specifications and per-candidate scoring."""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

from ..synth import BOOL, REAL, CandidateAbort, CandidateSampler
from .stats import (LOG_SCORE_FLOOR, g_test_log_score, g_test_p_value, ks_two_sample_p_value,
                    moment_log_penalty, moments)

__all__ = [
    "MomentsTarget", "GTestBernoulli", "KSTwoSample", "PosteriorCompile", "ScoreReport",
    "score_candidate", "MIN_J", "resolve_target",
]

NEG_INF = float("-inf")
MIN_J = 10


def _check_j(j):
    if not isinstance(j, int) or j < MIN_J:
        raise ValueError(f"J must be an integer of at least {MIN_J}, got {j!r}")


def _floor(x: float) -> float:
    return x if x >= LOG_SCORE_FLOOR else LOG_SCORE_FLOOR


@dataclass(frozen=True)
class MomentsTarget:
    """Match (mean, variance, skewness, excess kurtosis) under Gaussian noise ``sigma``."""

    targets: Tuple[float, ...] = (0.0, 1.0, 0.0, 0.0)
    sigma: float = 0.1
    J: int = 1000
    params: Tuple[tuple, ...] = ((),)
    holdout: Tuple[tuple, ...] = ()

    def __post_init__(self):
        _check_j(self.J)
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if len(self.targets) != 4:
            raise ValueError("moment targets are (mean, variance, skewness, kurtosis)")
        object.__setattr__(self, "params", tuple(tuple(map(float, p)) for p in self.params))
        object.__setattr__(self, "holdout", tuple(tuple(map(float, p)) for p in self.holdout))

    @property
    def input_types(self):
        return (REAL,) * len(self.params[0])

    output_type = REAL

    @property
    def training_params(self):
        return [p for p in self.params if p not in self.holdout]

    def component(self, xs, param) -> dict:
        m = moments([float(x) for x in xs])
        stats = (m.mean, m.variance, m.skewness, m.kurtosis)
        with_nan = any(not math.isfinite(s) for s in stats)
        score = LOG_SCORE_FLOOR if with_nan else _floor(
            moment_log_penalty(stats, self.targets, self.sigma))
        return {"param": list(param), "log_score": score, "mean": m.mean,
                "variance": m.variance, "skewness": m.skewness, "kurtosis": m.kurtosis}


@dataclass(frozen=True)
class GTestBernoulli:
    """Bernoulli(theta) family, scored by ln of the G-test p-value at each theta."""

    thetas: Tuple[float, ...] = (0.3, 0.5, 0.7)
    J: int = 100
    holdout: Tuple[float, ...] = ()

    def __post_init__(self):
        _check_j(self.J)
        if not self.thetas or any(not 0.0 < t < 1.0 for t in self.thetas):
            raise ValueError("thetas must lie strictly inside (0, 1)")
        object.__setattr__(self, "thetas", tuple(float(t) for t in self.thetas))
        object.__setattr__(self, "holdout", tuple(float(t) for t in self.holdout))
        if not self.training_params:
            raise ValueError("every theta is held out; nothing to train on")

    input_types = (REAL,)
    output_type = BOOL

    @property
    def params(self):
        return tuple((t,) for t in self.thetas)

    @property
    def training_params(self):
        return [(t,) for t in self.thetas if t not in self.holdout]

    @property
    def holdout_params(self):
        return [(t,) for t in self.holdout]

    def component(self, xs, param) -> dict:
        bits = [_binary(x) for x in xs]
        p = g_test_p_value(bits, param[0])
        return {"param": list(param), "log_score": g_test_log_score(bits, param[0]),
                "p_value": p, "frequency": sum(bits) / len(bits)}


def _binary(x) -> int:
    if x is True or x is False:
        return int(x)
    if x == 0.0 or x == 1.0:
        return int(x)
    raise CandidateAbort(f"non-binary output {x!r} under a Bernoulli target")


@dataclass(frozen=True)
class KSTwoSample:
    """Empirical target samples, one set per parameter tuple; scored by ln KS p-value."""

    data: Tuple[tuple, ...]
    params: Tuple[tuple, ...] = ((),)
    J: int = 500
    holdout: Tuple[tuple, ...] = ()

    def __post_init__(self):
        _check_j(self.J)
        if len(self.data) != len(self.params):
            raise ValueError("need one sample set per parameter tuple")
        if any(len(d) == 0 for d in self.data):
            raise ValueError("empty target sample")
        object.__setattr__(self, "data", tuple(tuple(map(float, d)) for d in self.data))
        object.__setattr__(self, "params", tuple(tuple(map(float, p)) for p in self.params))
        object.__setattr__(self, "holdout", tuple(tuple(map(float, p)) for p in self.holdout))

    @property
    def input_types(self):
        return (REAL,) * len(self.params[0])

    output_type = REAL

    @property
    def training_params(self):
        return [p for p in self.params if p not in self.holdout]

    def component(self, xs, param) -> dict:
        ref = self.data[self.params.index(tuple(param))]
        ys = [float(x) for x in xs]
        p = ks_two_sample_p_value(ys, ref)
        return {"param": list(param), "log_score": math.log(p) if p > 0 else LOG_SCORE_FLOOR,
                "p_value": p}

    @classmethod
    def from_files(cls, paths: Sequence[str], params=((),), J: int = 500, holdout=()):
        data = []
        for path in paths:
            with open(path, encoding="utf-8") as fh:
                data.append(tuple(float(line) for line in fh if line.strip()))
        return cls(tuple(data), tuple(params), J, tuple(holdout))


@dataclass(frozen=True)
class PosteriorCompile:
    """Find a program whose prior matches a model's posterior for one PREDICT column."""

    program: str
    J: int = 500
    column: Optional[str] = None
    mh: Optional[object] = None

    def __post_init__(self):
        _check_j(self.J)

    def resolve(self) -> KSTwoSample:
        from ..infer import MHConfig, mh_chain
        cfg = self.mh if self.mh is not None else MHConfig(iterations=20_000)
        samples = mh_chain(self.program, cfg)
        col = samples.column(self.column if self.column is not None else 0)
        return KSTwoSample((tuple(float(x) for x in col),), ((),), self.J)


def resolve_target(spec):
    return spec.resolve() if isinstance(spec, PosteriorCompile) else spec


@dataclass
class ScoreReport:
    components: List[dict]
    total: float
    aborted: Optional[str] = None

    def to_json(self) -> str:
        return json.dumps({"components": self.components, "total": _json_num(self.total),
                           "aborted": self.aborted}, indent=2)


def _json_num(x):
    return x if math.isfinite(x) else ("-inf" if x < 0 else "inf")


def score_candidate(c: CandidateSampler, spec, rng: Optional[random.Random] = None,
                    params: Optional[Sequence[tuple]] = None) -> ScoreReport:
    """Draw ``J`` fresh samples per training parameter tuple and sum the log-scores."""
    spec = resolve_target(spec)
    _check_j(spec.J)
    if len(c.params) != len(spec.input_types):
        raise ValueError(f"candidate takes {len(c.params)} parameter(s), "
                         f"target needs {len(spec.input_types)}")
    rng = rng or random.Random()
    comps = []
    try:
        for param in (params if params is not None else spec.training_params):
            xs = c.sample(spec.J, param, rng)
            comps.append(spec.component(xs, param))
    except CandidateAbort as e:
        return ScoreReport(comps, NEG_INF, str(e))
    return ScoreReport(comps, sum(x["log_score"] for x in comps))
