import numpy as np
import pytest
from scipy import stats
from hypothesis import given, settings, strategies as st

from cwm_impute.distributions import (chol, chol_batch, inverse_diagonal, inverse_wishart_logpdf,
                                      make_rng, mvn_logpdf, mvn_logpdf_components,
                                      sample_categorical, sample_categorical_rows, sample_gamma,
                                      sample_inverse_wishart, sample_inverse_wishart_batch,
                                      sample_log_beta, split_rngs)
from cwm_impute.exceptions import NotSpdError, ParameterError, ValidationError

from conftest import random_spd


def test_make_rng_is_deterministic():
    a = make_rng(5).standard_normal(4)
    b = make_rng(5).standard_normal(4)
    assert np.array_equal(a, b)


def test_split_rngs_are_distinct_and_reproducible():
    r1 = [g.random() for g in split_rngs(3, 4)]
    r2 = [g.random() for g in split_rngs(3, 4)]
    assert r1 == r2
    assert len(set(r1)) == 4


def test_chol_reconstructs(rng):
    m = random_spd(rng, 4)
    L = chol(m)
    assert np.allclose(L @ L.T, m, atol=1e-12)
    assert np.allclose(np.triu(L, 1), 0.0)


def test_chol_reports_failing_pivot():
    m = np.diag([1.0, 2.0, -1.0])
    with pytest.raises(NotSpdError) as err:
        chol(m)
    assert err.value.pivot == 2


def test_chol_rejects_asymmetric():
    with pytest.raises(ValidationError):
        chol(np.array([[1.0, 0.2], [0.0, 1.0]]))


def test_chol_batch_reports_pivot():
    ms = np.stack([np.eye(2), np.array([[1.0, 2.0], [2.0, 1.0]])])
    with pytest.raises(NotSpdError) as err:
        chol_batch(ms)
    assert err.value.pivot == 1


def test_mvn_logpdf_matches_scipy(rng):
    m = random_spd(rng, 3)
    mu = rng.standard_normal(3)
    x = rng.standard_normal((7, 3))
    ours = mvn_logpdf(x, mu, chol(m))
    assert np.allclose(ours, stats.multivariate_normal(mu, m).logpdf(x), atol=1e-12)
    assert isinstance(mvn_logpdf(x[0], mu, chol(m)), float)


def test_mvn_logpdf_components_matches_loop(rng):
    G, p = 4, 3
    mus = rng.standard_normal((G, p))
    sig = np.stack([random_spd(rng, p) for _ in range(G)])
    x = rng.standard_normal((11, p))
    out = mvn_logpdf_components(x, mus, chol_batch(sig))
    ref = np.column_stack([stats.multivariate_normal(mus[g], sig[g]).logpdf(x) for g in range(G)])
    assert np.allclose(out, ref, atol=1e-10)


def test_inverse_diagonal(rng):
    m = random_spd(rng, 4)
    assert np.allclose(inverse_diagonal(chol(m)), np.diag(np.linalg.inv(m)))


def test_inverse_wishart_mean(rng):
    p, df = 3, 9.0
    scale = random_spd(rng, p)
    draws = np.stack([sample_inverse_wishart(df, scale, rng) for _ in range(20000)])
    expected = scale / (df - p - 1)
    se = draws.std(axis=0) / np.sqrt(draws.shape[0])
    assert np.all(np.abs(draws.mean(axis=0) - expected) < 5 * se + 1e-12)


def test_inverse_wishart_batch_mean(rng):
    p = 2
    scales = np.stack([random_spd(rng, p), random_spd(rng, p)])
    dfs = np.array([6.0, 12.0])
    draws = np.stack([sample_inverse_wishart_batch(dfs, scales, rng) for _ in range(20000)])
    expected = scales / (dfs - p - 1)[:, None, None]
    se = draws.std(axis=0) / np.sqrt(draws.shape[0])
    assert np.all(np.abs(draws.mean(axis=0) - expected) < 5 * se)


def test_inverse_wishart_draws_are_spd(rng):
    for _ in range(50):
        s = sample_inverse_wishart(4.5, random_spd(rng, 3), rng)
        assert np.allclose(s, s.T)
        chol(s)


def test_inverse_wishart_logpdf_matches_scipy(rng):
    p, df = 3, 7.0
    delta = np.array([0.5, 1.5, 2.0])
    sigma = random_spd(rng, p)
    ours = inverse_wishart_logpdf(chol(sigma), df, delta)
    assert ours == pytest.approx(stats.invwishart(df, np.diag(delta)).logpdf(sigma), abs=1e-9)


def test_inverse_wishart_rejects_small_df(rng):
    with pytest.raises(ParameterError):
        sample_inverse_wishart(1.5, np.eye(3), rng)


def test_log_beta_moments(rng):
    ln, l1m = sample_log_beta(np.full(50000, 2.0), np.full(50000, 3.0), rng)
    nu = np.exp(ln)
    assert np.allclose(np.exp(ln) + np.exp(l1m), 1.0)
    assert nu.mean() == pytest.approx(0.4, abs=0.005)
    assert nu.var() == pytest.approx(6 / (25 * 6), abs=0.002)


def test_log_beta_tiny_shape_keeps_precision(rng):
    # nu is 1 to machine precision but log(1 - nu) must stay finite and
    # follow -log(1 - nu) ~ Exp(rate = b) for Beta(1, b)
    _, l1m = sample_log_beta(np.ones(50000), np.full(50000, 0.01), rng)
    assert np.all(np.isfinite(l1m))
    assert (-l1m).mean() == pytest.approx(100.0, rel=0.03)


def test_gamma_rate_convention(rng):
    x = sample_gamma(3.0, 2.0, rng, size=100000)
    assert x.mean() == pytest.approx(1.5, rel=0.01)
    with pytest.raises(ParameterError):
        sample_gamma(1.0, 0.0, rng)


def test_categorical_never_picks_zero_weight(rng):
    w = np.array([0.0, 0.5, 0.0, 0.5])
    picks = {sample_categorical(w, rng) for _ in range(500)}
    assert picks == {1, 3}
    rows = sample_categorical_rows(np.tile(w, (1000, 1)), rng)
    assert set(np.unique(rows)) == {1, 3}


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=6).filter(lambda v: sum(v) > 0.1))
def test_categorical_rows_support(weights):
    w = np.asarray(weights) / np.sum(weights)
    out = sample_categorical_rows(np.tile(w, (200, 1)), make_rng(0))
    assert np.all(w[out] > 0)
