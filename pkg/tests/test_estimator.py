import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from probprog.estimator import ProgramSynthesizer


def test_params_round_trip():
    est = ProgramSynthesizer(n_iter=50, J=20)
    assert est.get_params()["n_iter"] == 50
    assert clone(est).get_params() == est.get_params()
    est.set_params(top=3)
    assert est.top == 3


def test_not_fitted():
    with pytest.raises(NotFittedError):
        ProgramSynthesizer().sample(3)


def test_fit_sample_score():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(200, 1))
    est = ProgramSynthesizer(n_iter=150, J=50, top=3, random_state=1).fit(X)
    assert est.n_features_in_ == 1
    assert 1 <= len(est.leaderboard_) <= 3
    assert est.source_text_.startswith("(lambda")
    draws = est.sample(20)
    assert draws.shape == (20,) and np.all(np.isfinite(draws))
    assert np.array_equal(draws, est.sample(20))
    s = est.score(rng.normal(size=100))
    assert s <= 0.0


def test_rejects_multiple_features():
    with pytest.raises(ValueError, match="single feature"):
        ProgramSynthesizer(n_iter=10, J=10).fit(np.zeros((5, 2)))
