"""Comparison imputers: Bayesian linear regression (``norm``), a covariate-free
mixture on the response (``mean``) and predictive mean matching (``pmm``).

Each function returns the completed response vector; observed entries are
copied through unchanged.
"""

import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import qr, solve_triangular

from .distributions import make_rng
from .exceptions import SingularFitError, ValidationError
from .gibbs import Hyperparams, McmcConfig, run_chain
from .model import MissingDataset

# |R_jj| below this fraction of the largest pivot is treated as rank deficient
RANK_TOL = 1e-10


@dataclass
class PmmConfig:
    donors: int = 5
    draws: int = 1

    def __post_init__(self):
        if int(self.donors) < 1:
            raise ValidationError("donors must be at least 1")
        if int(self.draws) < 1:
            raise ValidationError("draws must be at least 1")


@dataclass
class RegressionDraw:
    """One posterior draw for a linear regression with intercept."""

    beta_hat: np.ndarray
    beta: np.ndarray
    sigma: float


def _design(X):
    return np.column_stack([np.ones(X.shape[0]), X])


def draw_regression(X, y, rng):
    """Draw ``(beta, sigma)`` under the flat / ``1/sigma^2`` reference prior.

    ``sigma^2 = RSS / chi2_{n-q}`` and ``beta = beta_hat + sigma R^{-1} z``
    with ``QR`` the thin factorisation of the design.
    """
    A = _design(np.asarray(X, dtype=float))
    n, q = A.shape
    if n <= q:
        raise ValidationError(f"need more than {q} observed rows to fit the regression (got {n})")
    Q, R = qr(A, mode="economic")
    diag = np.abs(np.diag(R))
    if diag.min() <= RANK_TOL * max(diag.max(), 1.0):
        raise SingularFitError("regression design is rank deficient")
    beta_hat = solve_triangular(R, Q.T @ y)
    resid = y - A @ beta_hat
    rss = float(resid @ resid)
    sigma = float(np.sqrt(rss / rng.chisquare(n - q)))
    beta = beta_hat + sigma * solve_triangular(R, rng.standard_normal(q))
    return RegressionDraw(beta_hat, beta, sigma)


def _check(data):
    if not isinstance(data, MissingDataset):
        raise ValidationError("expected a MissingDataset")
    if data.n_missing == data.n:
        raise ValidationError("no observed responses")


def impute_norm(data, rng):
    """Bayesian linear-regression imputation (single draw)."""
    _check(data)
    if data.d < 1:
        raise ValidationError("norm imputation needs at least one covariate")
    rng = make_rng(rng)
    fit = draw_regression(data.X_obs, data.y_obs, rng)
    y = data.y.copy()
    Am = _design(data.X_mis)
    y[data.mask] = Am @ fit.beta + fit.sigma * rng.standard_normal(Am.shape[0])
    return y


def impute_pmm(data, cfg=None, rng=None):
    """Predictive mean matching with type-1 matching.

    Observed rows are scored with the least-squares coefficients, missing rows
    with a posterior draw; each missing row copies the observed response of a
    donor picked uniformly from its ``cfg.donors`` nearest observed scores.
    """
    _check(data)
    if data.d < 1:
        raise ValidationError("pmm imputation needs at least one covariate")
    cfg = cfg or PmmConfig()
    rng = make_rng(0 if rng is None else rng)
    y_obs = data.y_obs
    donors = int(cfg.donors)
    if y_obs.shape[0] < donors:
        warnings.warn(f"only {y_obs.shape[0]} observed rows; donor pool shrunk from {donors}",
                      RuntimeWarning, stacklevel=2)
        donors = y_obs.shape[0]
    fit = draw_regression(data.X_obs, y_obs, rng)
    score_obs = _design(data.X_obs) @ fit.beta_hat
    score_mis = _design(data.X_mis) @ fit.beta
    dist = np.abs(score_mis[:, None] - score_obs[None, :])
    # stable sort keeps tie-breaking deterministic
    pool = np.argsort(dist, axis=1, kind="stable")[:, :donors]
    pick = pool[np.arange(pool.shape[0]), rng.integers(0, donors, size=pool.shape[0])]
    y = data.y.copy()
    y[data.mask] = y_obs[pick]
    return y


def impute_mean(data, hyper=None, config=None, rng=None):
    """Impute from a mixture fitted to the response alone.

    Runs the Gibbs sampler with no covariates, so missing rows draw their
    component from the weights only.  Returns ``(y_completed, chain)`` taken
    at the MAP state.
    """
    _check(data)
    marginal = MissingDataset(np.zeros((data.n, 0)), data.y.copy(), data.mask.copy(),
                              [data.column_names[-1]])
    config = config or McmcConfig()
    if rng is not None:
        config = replace(config, seed=int(make_rng(rng).integers(2 ** 63)))
    chain = run_chain(marginal, hyper or Hyperparams(), config)
    y = data.y.copy()
    y[data.mask] = chain.map_state.y_fill
    return y, chain
