"""Estimator wrapper: fit a sampler program to one-dimensional data."""
from __future__ import annotations

import math
import random
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .score import KSTwoSample, SearchConfig, ks_two_sample_p_value, synthesize
from .synth import DEFAULT_WHITELIST, GrammarConfig, compile_source

__all__ = ["ProgramSynthesizer"]


class ProgramSynthesizer(BaseEstimator):
    """Search for a parameterless program whose samples match ``X`` (two-sample KS score).

    After ``fit``, ``source_text_`` holds the best program and ``sample``
    draws from it.  ``score`` is the log KS p-value of fresh draws against
    new data, so higher is better.
    """

    def __init__(self, n_iter: int = 20_000, n_chains: int = 1, J: int = 500, top: int = 10,
                 whitelist: Optional[frozenset] = None, max_depth: int = 12,
                 random_state: int = 42):
        self.n_iter = n_iter
        self.n_chains = n_chains
        self.J = J
        self.top = top
        self.whitelist = whitelist
        self.max_depth = max_depth
        self.random_state = random_state

    def _column(self, X):
        X = check_array(X, ensure_2d=False, dtype=np.float64)
        if X.ndim == 2:
            if X.shape[1] != 1:
                raise ValueError(f"expected a single feature, got {X.shape[1]}")
            X = X[:, 0]
        return X

    def fit(self, X, y=None):
        data = self._column(X)
        target = KSTwoSample((tuple(data.tolist()),), ((),), self.J)
        cfg = GrammarConfig(max_depth=self.max_depth,
                            primitive_whitelist=frozenset(self.whitelist or DEFAULT_WHITELIST))
        search = SearchConfig(iterations=self.n_iter, chains=self.n_chains, top=self.top,
                              seed=self.random_state)
        result = synthesize(target, cfg, search)
        self.leaderboard_ = [e.to_dict() for e in result]
        self.source_text_ = result.head.source_text
        self.best_score_ = result.head.mean_score
        self.sampler_ = compile_source(self.source_text_, (), "real")
        self.n_features_in_ = 1
        return self

    def sample(self, n_samples: int = 1, random_state: Optional[int] = None) -> np.ndarray:
        check_is_fitted(self, "sampler_")
        rng = random.Random(self.random_state if random_state is None else random_state)
        return np.asarray(self.sampler_.sample(n_samples, (), rng), dtype=np.float64)

    def score(self, X, y=None) -> float:
        check_is_fitted(self, "sampler_")
        data = self._column(X)
        p = ks_two_sample_p_value(self.sample(self.J).tolist(), data.tolist())
        return math.log(p) if p > 0 else -math.inf
