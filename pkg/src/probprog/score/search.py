"""ABC synthesis: pseudo-marginal MH over derivations plus a re-scored leaderboard."""
from __future__ import annotations

import logging
import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from ..synth import (Derivation, GrammarConfig, compile_candidate, mutate_derivation,
                     productions)
from .targets import resolve_target, score_candidate

__all__ = ["SearchConfig", "LeaderboardEntry", "SynthesisResult", "synthesize", "rescore",
           "rank_entries", "run_chain"]

log = logging.getLogger(__name__)
NEG_INF = float("-inf")


@dataclass
class SearchConfig:
    iterations: int = 20_000
    seed: int = 42
    chains: int = 1
    top: int = 10
    rescore: int = 10
    pool: int = 50
    init_retries: int = 1000
    parallel: bool = True


@dataclass
class LeaderboardEntry:
    source_text: str
    body_text: str
    mean_score: float
    scores: List[float]
    log_prior: float
    components: List[dict]
    first_seen: tuple
    derivation: Optional[Derivation] = field(default=None, repr=False)

    @property
    def stderr(self) -> float:
        finite = [s for s in self.scores if math.isfinite(s)]
        if len(finite) < 2 or len(finite) != len(self.scores):
            return 0.0
        return float(np.std(finite, ddof=1) / math.sqrt(len(finite)))

    def to_dict(self) -> dict:
        return {"source": self.source_text, "mean_score": _num(self.mean_score),
                "scores": [_num(s) for s in self.scores], "log_prior": _num(self.log_prior),
                "components": [{k: _num(v) if isinstance(v, float) else v for k, v in c.items()}
                               for c in self.components]}


def _num(x):
    if math.isfinite(x):
        return x
    return "nan" if math.isnan(x) else ("-inf" if x < 0 else "inf")


@dataclass
class SynthesisResult:
    leaderboard: List[LeaderboardEntry]
    acceptance_rates: List[float]
    target: object

    def __iter__(self):
        return iter(self.leaderboard)

    def __len__(self):
        return len(self.leaderboard)

    def __getitem__(self, i):
        return self.leaderboard[i]

    @property
    def head(self) -> LeaderboardEntry:
        return self.leaderboard[0]


def _score(d: Derivation, target, rng) -> float:
    return score_candidate(compile_candidate(d), target, rng).total


def _initial(target, cfg, rng, retries) -> Derivation:
    for _ in range(retries):
        d = productions(target.input_types, target.output_type, cfg, rng)
        if d.valid:
            return d
    raise RuntimeError("could not draw a valid initial derivation")


def _run_chain(target, cfg: GrammarConfig, search: SearchConfig, seed: int, chain: int,
               init: Optional[Derivation], observer: Optional[Callable] = None):
    rng = random.Random(seed)
    d = init if init is not None else _initial(target, cfg, rng, search.init_retries)
    s = _score(d, target, rng)
    # pool: body text -> [single score, derivation, first seen]
    pool: Dict[str, list] = {d.body_text: [s, d, (chain, 0)]}
    accepted = 0
    for it in range(1, search.iterations + 1):
        d2, q_fwd, q_rev = mutate_derivation(d, cfg, rng)
        s2 = _score(d2, target, rng) if d2.valid else NEG_INF
        if s2 == NEG_INF:
            if observer is not None:
                observer(d)
            continue
        text = d2.body_text
        if text not in pool:
            pool[text] = [s2, d2, (chain, it)]
        elif s2 > pool[text][0]:
            pool[text][0] = s2
        log_alpha = (d2.log_prior + s2) - (d.log_prior + s) + q_rev - q_fwd
        u = rng.random()
        if u > 0.0 and math.log(u) < min(0.0, log_alpha):
            d, s = d2, s2
            accepted += 1
        if observer is not None:
            observer(d)
        if len(pool) > 4 * search.pool:
            _trim(pool, search.pool)
    if d.body_text not in pool:
        pool[d.body_text] = [s, d, (chain, search.iterations + 1)]
    _trim(pool, search.pool)
    return pool, accepted / max(1, search.iterations)


def _trim(pool: Dict[str, list], keep: int) -> None:
    # chain starting points are never dropped
    ranked = sorted(pool.items(), key=lambda kv: (kv[1][2][1] != 0, -kv[1][0], kv[1][2]))
    for text, _ in ranked[keep:]:
        del pool[text]


def run_chain(target, cfg: Optional[GrammarConfig] = None, search: Optional[SearchConfig] = None,
              init: Optional[Derivation] = None, observer: Optional[Callable] = None):
    """One synthesis chain seeded by ``search.seed``; returns (pool, acceptance rate).

    ``observer`` is called with the chain state after every step.
    """
    search = search or SearchConfig()
    return _run_chain(resolve_target(target), cfg or GrammarConfig(), search, search.seed, 0,
                      init, observer)


def _run_chain_args(job):
    return _run_chain(*job)


def rescore(candidates: Sequence[Derivation], target, evaluations: int, seed: int,
            first_seen: Optional[Sequence[tuple]] = None) -> List[LeaderboardEntry]:
    """Score every candidate ``evaluations`` times with shared seeds and rank them.

    Evaluation k uses the same random stream for every candidate, so score
    differences are paired.  Ranking is greedy: a candidate may take the
    next place only if no remaining candidate beats its mean by more than
    three paired standard errors; among those eligible the higher prior
    wins (then the higher mean, then the earlier discovery).
    """
    target = resolve_target(target)
    seeds = [int(x) for x in np.random.SeedSequence([seed, 7]).generate_state(evaluations)]
    first_seen = first_seen or [(0, i) for i in range(len(candidates))]
    entries = []
    for d, seen in zip(candidates, first_seen):
        c = compile_candidate(d)
        reports = [score_candidate(c, target, random.Random(k)) for k in seeds]
        scores = [r.total for r in reports]
        mean = float(np.mean(scores)) if all(math.isfinite(x) for x in scores) else NEG_INF
        entries.append(LeaderboardEntry(
            c.source_text, d.body_text, mean, scores, d.log_prior,
            _average_components(reports), seen, d))
    return rank_entries(entries)


def _paired_se(a: LeaderboardEntry, b: LeaderboardEntry) -> float:
    diff = np.asarray(a.scores) - np.asarray(b.scores)
    if diff.size < 2 or not np.all(np.isfinite(diff)):
        return 0.0
    return float(np.std(diff, ddof=1) / math.sqrt(diff.size))


def _not_dominated(c: LeaderboardEntry, others: Sequence[LeaderboardEntry]) -> bool:
    for x in others:
        if x is c or not x.mean_score > c.mean_score:
            continue
        if c.mean_score == NEG_INF or x.mean_score - c.mean_score > 3.0 * _paired_se(x, c):
            return False
    return True


def rank_entries(entries: Sequence[LeaderboardEntry]) -> List[LeaderboardEntry]:
    remaining = sorted(entries, key=lambda e: (-e.mean_score, e.first_seen))
    ranked = []
    while remaining:
        eligible = [c for c in remaining if _not_dominated(c, remaining)]
        best = min(eligible, key=lambda e: (-e.log_prior, -e.mean_score, e.first_seen))
        ranked.append(best)
        remaining.remove(best)
    return ranked


def _average_components(reports) -> List[dict]:
    usable = [r.components for r in reports if r.aborted is None and r.components]
    if not usable:
        return []
    out = []
    for i, first in enumerate(usable[0]):
        merged = {"param": first["param"]}
        for key, value in first.items():
            if key == "param" or not isinstance(value, (int, float)):
                continue
            merged[key] = float(np.mean([comps[i][key] for comps in usable]))
        out.append(merged)
    return out


def synthesize(target, cfg: Optional[GrammarConfig] = None, search: Optional[SearchConfig] = None,
               init: Optional[Derivation] = None) -> SynthesisResult:
    """Search for candidate bodies whose samples match ``target``.

    Each chain runs MH on log prior + score, where the score is a fresh
    Monte Carlo estimate per proposal (the current state's estimate is
    kept).  The best distinct bodies seen by any chain are then re-scored
    and ranked.
    """
    cfg = cfg or GrammarConfig()
    search = search or SearchConfig()
    target = resolve_target(target)
    seeds = [int(np.random.SeedSequence([search.seed, i]).generate_state(1)[0])
             for i in range(search.chains)]
    jobs = [(target, cfg, search, s, i, init) for i, s in enumerate(seeds)]
    if search.chains > 1 and search.parallel:
        with ProcessPoolExecutor(max_workers=search.chains) as pool:
            results = list(pool.map(_run_chain_args, jobs))
    else:
        results = [_run_chain(*j) for j in jobs]
    merged: Dict[str, list] = {}
    for pool, _ in results:
        for text, entry in pool.items():
            if text not in merged or entry[2] < merged[text][2]:
                merged[text] = [max(entry[0], merged.get(text, [NEG_INF])[0]), entry[1], entry[2]]
    _trim(merged, search.pool)
    texts = list(merged)
    board = rescore([merged[t][1] for t in texts], target, search.rescore, search.seed,
                    [merged[t][2] for t in texts])
    rates = [r for _, r in results]
    log.info("synthesis finished: acceptance %s, head %s", rates, board[0].body_text)
    return SynthesisResult(board[:search.top], rates, target)
