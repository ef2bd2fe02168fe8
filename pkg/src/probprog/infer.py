"""Inference drivers: rejection sampling, single-site trace MH, enumeration."""
from __future__ import annotations

import csv
import io
import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .distributions import log_pdf, support_values
from .lang import EvalError, SamplingContext, format_value, global_environment
from .trace import Program, Trace, TraceContext, as_program, latent_addresses, propose, run_program

__all__ = [
    "MHConfig", "SampleSet", "InferenceError", "RejectionFailure",
    "rejection_sample", "mh_chain", "mh_step", "posterior_enumerate", "chain_seed",
    "DRIFT_SCALES",
]

NEG_INF = float("-inf")
DRIFT_SCALES = (1.0, 0.1, 0.01, 0.001)


class InferenceError(RuntimeError):
    pass


class RejectionFailure(InferenceError):
    pass


@dataclass
class MHConfig:
    """Chain settings.  ``burn_in``/``thin`` left as None pick the defaults:
    20% of the iterations, and thinning 1 (unconditioned) or 10 (conditioned).

    ``drift_prob`` is the probability that a transition on a continuous
    latent uses a symmetric Gaussian random walk (scale picked uniformly
    from ``drift_scales``) instead of resampling from the prior.  It only
    applies to programs with observations.
    """

    iterations: int = 10_000
    burn_in: Optional[int] = None
    thin: Optional[int] = None
    seed: int = 42
    chains: int = 1
    drift_prob: float = 0.5
    drift_scales: Tuple[float, ...] = DRIFT_SCALES
    init_retries: int = 100
    parallel: bool = True

    def resolved(self, conditioned: bool) -> Tuple[int, int]:
        m = self.burn_in if self.burn_in is not None else int(0.2 * self.iterations)
        k = self.thin if self.thin is not None else (10 if conditioned else 1)
        if k < 1:
            raise ValueError("thinning must be at least 1")
        if m < 0 or self.iterations <= m:
            raise ValueError(f"iterations ({self.iterations}) must exceed burn-in ({m})")
        return m, k

    def kept_per_chain(self, conditioned: bool) -> int:
        m, k = self.resolved(conditioned)
        return (self.iterations - m) // k


@dataclass
class SampleSet:
    columns: List[str]
    rows: List[tuple]
    acceptance_rate: Optional[float] = None
    seed: Optional[int] = None
    metadata: Dict[str, object] = field(default_factory=dict)

    def __len__(self):
        return len(self.rows)

    def column(self, key) -> list:
        i = self.columns.index(key) if isinstance(key, str) else key
        return [r[i] for r in self.rows]

    def to_csv(self, fh=None) -> Optional[str]:
        out = fh if fh is not None else io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([format_value(v) for v in r])
        if fh is None:
            return out.getvalue()
        return None


def chain_seed(seed: int, i: int) -> int:
    return int(np.random.SeedSequence([seed, i]).generate_state(1, dtype=np.uint64)[0])


# -- rejection -----------------------------------------------------------------------

def _simulate(program: Program, ctx) -> Tuple[bool, tuple]:
    env = global_environment()
    predicts = []
    ok = True
    for kind, label, node, value in program.steps:
        if kind == "assume":
            env.define(label, node.ev(env, ctx))
        elif kind == "observe":
            if not _matches(node.ev(env, ctx), value):
                ok = False
                break
        else:
            predicts.append(node.ev(env, ctx))
    return ok, tuple(predicts)


def _matches(x, value) -> bool:
    if isinstance(x, bool) or isinstance(value, bool):
        return isinstance(x, bool) and isinstance(value, bool) and x == value
    return x == value


def rejection_sample(program, n: int, seed: int = 42, max_attempts: int = 10**6,
                     min_rate: float = 1e-6) -> SampleSet:
    """Simulate from the prior and keep runs whose observed bodies equal their values."""
    program = as_program(program)
    rng = random.Random(seed)
    ctx = SamplingContext(rng)
    rows, attempts = [], 0
    while len(rows) < n:
        if attempts >= max_attempts:
            rate = len(rows) / attempts
            if rate < min_rate:
                raise RejectionFailure(
                    f"accepted {len(rows)} of {attempts} runs (rate {rate:.3g}); "
                    "the observations look impossible or too unlikely for rejection")
        attempts += 1
        ok, row = _simulate(program, ctx)
        if ok:
            rows.append(row)
    return SampleSet(program.predict_columns, rows, len(rows) / attempts if attempts else 1.0,
                     seed, {"method": "rejection", "attempts": attempts})


# -- Metropolis-Hastings -------------------------------------------------------------

def _initial_trace(program: Program, rng: random.Random, retries: int) -> Trace:
    for _ in range(max(1, retries)):
        t = run_program(program, TraceContext(rng))
        if t.log_weight > NEG_INF:
            return t
    raise InferenceError(f"no initial trace with positive probability after {retries} attempts")


def mh_step(cur: Trace, program: Program, rng: random.Random,
            drift_prob: float = 0.0, drift_scales: Sequence[float] = DRIFT_SCALES):
    """One transition.  Returns (trace, accepted)."""
    latents = latent_addresses(cur)
    target = latents[rng.randrange(len(latents))]
    rec = cur.choices[target]
    if drift_prob > 0.0 and not rec.dist.family.discrete and rng.random() < drift_prob:
        scale = drift_scales[rng.randrange(len(drift_scales))]
        value = rec.value + scale * rng.gauss(0.0, 1.0)
        if log_pdf(rec.dist, value) == NEG_INF:
            # zero prior density, so the proposed trace has zero weight
            return cur, False
        prop = propose(cur, program, target, rng, value=value, symmetric=True)
    else:
        prop = propose(cur, program, target, rng)
    new = prop.trace
    if not new.log_weight > NEG_INF:
        return cur, False
    log_alpha = new.log_weight + prop.log_q_rev - cur.log_weight - prop.log_q_fwd
    if math.isnan(log_alpha):
        return cur, False
    log_alpha = min(0.0, log_alpha)
    u = rng.random()
    if u > 0.0 and math.log(u) < log_alpha:
        return new, True
    return cur, False


def _run_chain(directives, cfg: MHConfig, seed: int, conditioned: bool):
    program = Program(directives)
    m, k = cfg.resolved(conditioned)
    rng = random.Random(seed)
    cur = _initial_trace(program, rng, cfg.init_retries)
    if not latent_addresses(cur):
        raise InferenceError("MH needs at least one latent random choice")
    # without observations the prior proposal is already exact
    drift = cfg.drift_prob if conditioned else 0.0
    rows, accepted = [], 0
    for it in range(cfg.iterations):
        cur, ok = mh_step(cur, program, rng, drift, cfg.drift_scales)
        accepted += ok
        if it >= m and (it - m + 1) % k == 0:
            rows.append(cur.predict_values)
    return rows, accepted


def mh_chain(program, cfg: Optional[MHConfig] = None) -> SampleSet:
    """Run ``cfg.chains`` independent chains and concatenate their kept samples."""
    cfg = cfg or MHConfig()
    program = as_program(program)
    conditioned = program.has_observes
    cfg.resolved(conditioned)
    seeds = [chain_seed(cfg.seed, i) for i in range(cfg.chains)]
    jobs = [(program.directives, cfg, s, conditioned) for s in seeds]
    if cfg.chains > 1 and cfg.parallel:
        with ProcessPoolExecutor(max_workers=cfg.chains) as pool:
            results = list(pool.map(_run_chain_args, jobs))
    else:
        results = [_run_chain(*j) for j in jobs]
    rows = [r for chain_rows, _ in results for r in chain_rows]
    accepted = sum(a for _, a in results)
    rate = accepted / (cfg.iterations * cfg.chains)
    return SampleSet(program.predict_columns, rows, rate, cfg.seed,
                     {"method": "mh", "chains": cfg.chains,
                      "burn_in": cfg.resolved(conditioned)[0],
                      "thin": cfg.resolved(conditioned)[1]})


def _run_chain_args(job):
    return _run_chain(*job)


# -- exact enumeration ---------------------------------------------------------------

class _EnumContext:
    addressing = False
    max_calls = None

    def __init__(self, path: Sequence[int]):
        self.path = path
        self.taken: List[int] = []
        self.sizes: List[int] = []
        self.log_w = 0.0

    def choose(self, site, kind):
        sup = support_values(kind)
        if sup is None:
            raise InferenceError(f"cannot enumerate {kind}: support is not finite")
        i = len(self.taken)
        j = self.path[i] if i < len(self.path) else 0
        self.taken.append(j)
        self.sizes.append(len(sup))
        v = sup[j]
        self.log_w += log_pdf(kind, v)
        return v

    def observe(self, site, kind, value):  # pragma: no cover - observes are evaluated directly
        self.log_w += log_pdf(kind, value)
        return value

    def enter(self, site):
        pass

    def leave(self):
        pass


def posterior_enumerate(program, state_cap: int = 100_000) -> Dict[tuple, float]:
    """Exact posterior over PREDICT tuples by walking every control path.

    Observed bodies are evaluated like any other expression (their random
    choices are enumerated too) and the run is kept only when the result
    equals the observed value, so both stochastic and deterministic
    observations are handled.
    """
    program = as_program(program)
    stack: List[List[int]] = [[]]
    acc: Dict[tuple, float] = {}
    states = 0
    while stack:
        path = stack.pop()
        states += 1
        if states > state_cap:
            raise InferenceError(f"more than {state_cap} execution paths")
        ctx = _EnumContext(path)
        ok, row = _simulate(program, ctx)
        # schedule siblings for every choice made beyond the forced prefix
        for i in range(len(path), len(ctx.taken)):
            for j in range(1, ctx.sizes[i]):
                stack.append(ctx.taken[:i] + [j])
        if ok and ctx.log_w > NEG_INF:
            acc[row] = acc.get(row, 0.0) + math.exp(ctx.log_w)
    total = sum(acc.values())
    if total <= 0.0:
        raise InferenceError("the observations have probability zero")
    return {k: v / total for k, v in acc.items()}
