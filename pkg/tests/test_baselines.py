import warnings

import numpy as np
import pytest

from cwm_impute.baselines import PmmConfig, impute_mean, impute_norm, impute_pmm
from cwm_impute.distributions import make_rng
from cwm_impute.exceptions import SingularFitError, ValidationError
from cwm_impute.gibbs import Hyperparams, McmcConfig, run_chain
from cwm_impute.model import MissingDataset
from cwm_impute.scenarios import builtin_scenario, simulate


def linear_data(n=500, noise=0.0, seed=0):
    rng = make_rng(seed)
    x = rng.uniform(0, 6, n)
    y = 2 * x + noise * rng.standard_normal(n)
    mask = np.zeros(n, dtype=bool)
    mask[np.argsort(np.abs(x - 3))[:10]] = True
    return MissingDataset(x[:, None], np.where(mask, np.nan, y), mask), x


def test_norm_noiseless_line():
    data, x = linear_data()
    y = impute_norm(data, make_rng(1))
    assert np.all(np.abs(y[data.mask] - 2 * x[data.mask]) < 0.1)


def test_norm_preserves_observed_and_is_seeded():
    data, _ = linear_data(noise=1.0)
    a = impute_norm(data, make_rng(3))
    b = impute_norm(data, make_rng(3))
    assert np.array_equal(a, b)
    assert np.array_equal(a[~data.mask], data.y_obs)
    assert np.all(np.isfinite(a))


def test_norm_rank_deficient():
    X = np.column_stack([np.arange(10.0), 2 * np.arange(10.0)])
    y = np.arange(10.0)
    mask = np.zeros(10, dtype=bool)
    mask[0] = True
    with pytest.raises(SingularFitError):
        impute_norm(MissingDataset(X, np.where(mask, np.nan, y), mask), make_rng(0))


def test_norm_needs_rows():
    data = MissingDataset(np.arange(3.0)[:, None], [1.0, np.nan, np.nan], [False, True, True])
    with pytest.raises(ValidationError):
        impute_norm(data, make_rng(0))


def test_pmm_donor_property():
    for seed in range(5):
        spec, rule = builtin_scenario("paper-mar")
        _, data, _ = simulate(spec, rule, make_rng(seed))
        y = impute_pmm(data, PmmConfig(donors=5), make_rng(seed))
        observed = set(data.y_obs.tolist())
        assert all(v in observed for v in y[data.mask])
        assert np.array_equal(y[~data.mask], data.y_obs)


def test_pmm_repeats_donors_in_sparse_region():
    data, x = linear_data(noise=0.5)
    y = impute_pmm(data, PmmConfig(donors=1), make_rng(0))
    assert len(np.unique(y[data.mask])) < data.n_missing


def test_pmm_shrinks_pool_with_warning():
    X = np.arange(6.0)[:, None]
    y = np.array([0.0, 1.1, 1.9, np.nan, 4.2, np.nan])
    data = MissingDataset(X, y, np.isnan(y))
    with pytest.warns(RuntimeWarning, match="donor pool"):
        out = impute_pmm(data, PmmConfig(donors=10), make_rng(0))
    assert set(out[data.mask]) <= set(data.y_obs)


def test_pmm_config_validation():
    with pytest.raises(ValidationError):
        PmmConfig(donors=0)


def test_mean_mimics_observed_proportions():
    rng = make_rng(2)
    n = 400
    lab = rng.random(n) < 0.7
    y = np.where(lab, rng.normal(0, 0.5, n), rng.normal(8, 0.5, n))
    mask = rng.random(n) < 0.3
    data = MissingDataset(rng.standard_normal((n, 1)), np.where(mask, np.nan, y), mask)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        out, chain = impute_mean(data, Hyperparams(G=5),
                                 McmcConfig(burn_in=200, target_ess=50, max_iterations=1200, seed=1))
    low_share_obs = np.mean(data.y_obs < 4)
    assert np.mean(out[data.mask] < 4) == pytest.approx(low_share_obs, abs=0.1)
    assert np.array_equal(out[~data.mask], data.y_obs)


def test_norm_matches_single_component_sampler():
    # the one-component cluster-weighted model implies the same predictive
    # distribution for y given x as Bayesian linear regression (up to priors)
    rng = make_rng(6)
    n = 300
    x = rng.normal(2, 1, n)
    y = 1 + 1.5 * x + 0.7 * rng.standard_normal(n)
    mask = np.zeros(n, dtype=bool)
    mask[:60] = True
    x[:60] = 2.5
    data = MissingDataset(x[:, None], np.where(mask, np.nan, y), mask)
    norm_draws = np.concatenate([impute_norm(data, make_rng(s))[mask] for s in range(40)])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ch = run_chain(data, Hyperparams(G=1),
                       McmcConfig(burn_in=200, target_ess=100, max_iterations=1000, seed=3))
    cwm_draws = np.concatenate([s.y_fill for s in ch.states])
    # predictive mean 1 + 1.5 * 2.5 = 4.75, sd ~ 0.7
    assert norm_draws.mean() == pytest.approx(cwm_draws.mean(), abs=0.1)
    assert norm_draws.std() == pytest.approx(cwm_draws.std(), rel=0.1)
