import json
import math
import random

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy import stats

from probprog.score import (LOG_SCORE_FLOOR, GTestBernoulli, KSTwoSample, MomentsTarget,
                            g_test_log_score, g_test_p_value, g_test_statistic, kolmogorov_sf,
                            ks_statistic, ks_two_sample_p_value, moment_log_penalty, moments,
                            score_candidate)
from probprog.synth import REAL, compile_source

from conftest import read_fixture


# -- moments ---------------------------------------------------------------------

def test_moments_standard_normal():
    xs = np.random.default_rng(0).standard_normal(100000)
    m = moments(xs)
    assert abs(m.mean) < 0.02 and abs(m.variance - 1) < 0.05
    assert abs(m.skewness) < 0.05 and abs(m.kurtosis) < 0.1


def test_moments_degenerate():
    m = moments([1, 1, 1, 1])
    assert (m.mean, m.variance, m.skewness, m.kurtosis) == (1, 0, 0, 0)
    assert m.degenerate


def test_moments_overflow_is_not_degenerate():
    m = moments([1e200, -1e200, 3.0])
    assert m.variance == math.inf and not m.degenerate
    comp = MomentsTarget(J=10).component([1e200, -1e200, 3.0] * 4, ())
    assert comp["log_score"] == LOG_SCORE_FLOOR


def test_moments_hand_computed():
    m = moments([0, 0, 0, 1, 1, 1])
    assert m.mean == pytest.approx(0.5)
    assert m.variance == pytest.approx(0.3)
    assert m.skewness == pytest.approx(0.0, abs=1e-12)
    assert m.kurtosis == pytest.approx(-2.0)
    assert not m.degenerate


def test_moments_errors():
    with pytest.raises(ValueError):
        moments([])


@settings(max_examples=50)
@given(st.lists(st.floats(-1e3, 1e3), min_size=4, max_size=60))
def test_moments_match_scipy(xs):
    assume(np.var(xs) > 1e-6)
    m = moments(xs)
    assert m.mean == pytest.approx(np.mean(xs), abs=1e-9)
    assert m.variance == pytest.approx(np.var(xs, ddof=1), rel=1e-9)
    assert m.skewness == pytest.approx(stats.skew(xs), abs=1e-6)
    assert m.kurtosis == pytest.approx(stats.kurtosis(xs), abs=1e-6)


def test_moment_penalty():
    top = moment_log_penalty([0, 1, 0, 0], [0, 1, 0, 0], 0.1)
    assert top == pytest.approx(4 * (-math.log(0.1) - 0.5 * math.log(2 * math.pi)))
    # the quoted figure 5.5284 is a rounding of this closed form to within 0.01
    assert top == pytest.approx(5.5284, abs=0.01)
    assert top - moment_log_penalty([0.1, 1, 0, 0], [0, 1, 0, 0], 0.1) == pytest.approx(0.5)
    assert top - moment_log_penalty([0, 1, 1.0, 0], [0, 1, 0, 0], 0.1) == pytest.approx(50)
    with pytest.raises(ValueError):
        moment_log_penalty([0, 1], [0, 1, 0], 0.1)


# -- G-test ----------------------------------------------------------------------

def ones(k, n):
    return [1] * k + [0] * (n - k)


def test_g_test_examples():
    assert g_test_statistic(ones(50, 100), 0.5) == 0.0
    assert g_test_p_value(ones(50, 100), 0.5) == 1.0
    g = g_test_statistic(ones(60, 100), 0.5)
    assert g == pytest.approx(2 * (60 * math.log(1.2) + 40 * math.log(0.8)))
    assert g == pytest.approx(4.0271, abs=1e-4)
    assert g_test_p_value(ones(60, 100), 0.5) == pytest.approx(0.0448, abs=1e-4)
    assert g_test_statistic(ones(100, 100), 0.5) == pytest.approx(200 * math.log(2))
    assert g_test_p_value(ones(100, 100), 0.5) < 1e-30


def test_g_test_log_score():
    assert g_test_log_score(ones(50, 100), 0.5) == 0.0
    assert g_test_log_score(ones(60, 100), 0.5) == pytest.approx(math.log(0.04484), abs=2e-3)
    assert g_test_log_score(ones(100, 100), 0.5) == pytest.approx(-138.63 / 2, abs=5)
    assert g_test_log_score(ones(10000, 10000), 0.5) == LOG_SCORE_FLOOR


@settings(max_examples=100)
@given(st.integers(1, 300), st.data(), st.floats(0.01, 0.99))
def test_g_test_matches_scipy(n, data, theta):
    k = data.draw(st.integers(0, n))
    g = g_test_statistic(ones(k, n), theta)
    f_obs = [n - k, k]
    f_exp = [n * (1 - theta), n * theta]
    ref = stats.power_divergence(f_obs, f_exp, lambda_="log-likelihood")
    assert g == pytest.approx(ref.statistic, rel=1e-9, abs=1e-9)
    p = g_test_p_value(ones(k, n), theta)
    assert 0.0 <= p <= 1.0
    assert p == pytest.approx(stats.chi2(1).sf(g), rel=1e-6, abs=1e-300)
    # relabelling symmetry
    assert p == pytest.approx(g_test_p_value(ones(n - k, n), 1 - theta), rel=1e-9, abs=1e-300)


# -- Kolmogorov-Smirnov ----------------------------------------------------------

def test_ks_examples():
    xs = list(np.random.default_rng(1).standard_normal(50))
    assert ks_statistic(xs, xs) == 0.0
    assert ks_two_sample_p_value(xs, xs) == 1.0
    assert ks_statistic([0.0] * 100, [1.0] * 100) == 1.0
    assert ks_two_sample_p_value([0.0] * 100, [1.0] * 100) < 1e-20


@pytest.mark.parametrize("lam", [0.05, 0.2, 0.5, 0.8, 0.99, 1.0, 1.3, 2.0, 3.5, 6.0])
def test_kolmogorov_sf_matches_scipy(lam):
    assert kolmogorov_sf(lam) == pytest.approx(stats.kstwobign.sf(lam), rel=1e-9, abs=1e-15)


@settings(max_examples=50)
@given(st.lists(st.floats(-100, 100), min_size=1, max_size=60),
       st.lists(st.floats(-100, 100), min_size=1, max_size=60))
def test_ks_matches_scipy_asymptotic(xs, ys):
    ref = stats.ks_2samp(xs, ys, method="asymp")
    assert ks_statistic(xs, ys) == pytest.approx(ref.statistic, abs=1e-12)
    p = ks_two_sample_p_value(xs, ys)
    assert 0.0 <= p <= 1.0
    lam = ref.statistic * math.sqrt(len(xs) * len(ys) / (len(xs) + len(ys)))
    assert p == pytest.approx(stats.kstwobign.sf(lam), rel=1e-8, abs=1e-12)


@settings(max_examples=30)
@given(st.lists(st.integers(-50, 50), min_size=2, max_size=40),
       st.lists(st.integers(-50, 50), min_size=2, max_size=40))
def test_ks_invariant_under_monotone_map(xs, ys):
    # integer inputs keep the map strictly increasing in floating point too
    f = lambda v: math.exp(v / 10) * 3 + 1
    assert ks_two_sample_p_value(xs, ys) == pytest.approx(
        ks_two_sample_p_value([f(x) for x in xs], [f(y) for y in ys]), abs=1e-12)


def test_ks_null_p_values_uniform():
    rng = np.random.default_rng(3)
    ps = [ks_two_sample_p_value(rng.standard_normal(500), rng.standard_normal(500))
          for _ in range(200)]
    assert stats.kstest(ps, "uniform").pvalue > 1e-3


# -- targets and score_candidate -------------------------------------------------

def test_target_validation():
    with pytest.raises(ValueError):
        MomentsTarget(sigma=0)
    with pytest.raises(ValueError):
        GTestBernoulli(thetas=(0.0, 0.5))
    with pytest.raises(ValueError):
        GTestBernoulli(J=0)
    with pytest.raises(ValueError):
        KSTwoSample(((1.0, 2.0),), J=5)


def test_bad_j_in_score_candidate():
    c = compile_source("(< (safe-uc 0.0 1.0) arg1)", (REAL,), "bool")
    spec = GTestBernoulli()
    object.__setattr__(spec, "J", 0)
    with pytest.raises(ValueError):
        score_candidate(c, spec, random.Random(0))


def test_arity_mismatch():
    c = compile_source("(safe-uc 0.0 1.0)", (), REAL)
    with pytest.raises(ValueError):
        score_candidate(c, GTestBernoulli(), random.Random(0))


def test_total_is_sum_and_json():
    c = compile_source("(< (safe-uc 0.0 1.0) arg1)", (REAL,), "bool")
    r = score_candidate(c, GTestBernoulli(holdout=(0.3,)), random.Random(0))
    assert [x["param"] for x in r.components] == [[0.5], [0.7]]
    assert r.total == sum(x["log_score"] for x in r.components)
    doc = json.loads(r.to_json())
    assert doc["total"] == r.total and len(doc["components"]) == 2
    assert all(0 <= x["p_value"] <= 1 for x in r.components)


def test_abort_gives_minus_infinity():
    c = compile_source("((lambda (p1) (recur p1)) arg1)", (REAL,), "bool")
    r = score_candidate(c, GTestBernoulli(), random.Random(0))
    assert r.total == -math.inf and r.aborted
    assert json.loads(r.to_json())["total"] == "-inf"


def test_non_binary_output_aborts_bernoulli_target():
    c = compile_source("(safe-uc 0.0 arg1)", (REAL,), REAL)
    assert score_candidate(c, GTestBernoulli(), random.Random(0)).total == -math.inf


def test_box_muller_moments_score():
    bm = compile_source(read_fixture("corpus", "box-muller.ch"), (REAL, REAL), REAL)
    spec = MomentsTarget(J=10000, params=((0.0, 1.0),))
    rng = random.Random(12)
    totals = [score_candidate(bm, spec, rng).total for _ in range(100)]
    assert sum(t >= -10 for t in totals) >= 95


def test_score_variance_shrinks_with_j():
    bm = compile_source(read_fixture("corpus", "box-muller.ch"), (REAL, REAL), REAL)
    rng = random.Random(2)
    spread = {}
    for J in (100, 10000):
        spec = MomentsTarget(J=J, params=((0.0, 1.0),))
        spread[J] = np.std([score_candidate(bm, spec, rng).total for _ in range(50)])
    assert spread[10000] < spread[100]


def test_ks_target_from_files(tmp_path):
    a = tmp_path / "a.txt"
    a.write_text("\n".join(str(x) for x in np.random.default_rng(0).uniform(0, 1, 400)) + "\n")
    spec = KSTwoSample.from_files([str(a)], J=400)
    good = compile_source("(safe-uc 0.0 1.0)", (), REAL)
    bad = compile_source("(safe-uc 0.5 3.0)", (), REAL)
    rng = random.Random(0)
    assert score_candidate(good, spec, rng).total > score_candidate(bad, spec, rng).total
