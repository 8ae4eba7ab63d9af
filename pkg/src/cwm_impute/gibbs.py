"""Gibbs sampler for the truncated Dirichlet-process Gaussian mixture with
embedded imputation of a univariate response.

One sweep runs, in order:

1. labels ``z`` for every row from the joint responsibilities of the
   completed vectors ``w = (x, y)``;
2. stick fractions ``nu`` and weights ``alpha``;
3. ``Sigma_g`` then ``mu_g`` for each component (normal-inverse-Wishart);
4. the hyperparameters ``eta`` and ``delta``;
5. imputation labels ``z_mis`` from the covariate-only responsibilities;
6. imputed responses from the component regressions;
7. relabelling so ``alpha`` is decreasing.

The hyperparameter updates in step 4 are the conjugate conditionals for the
Gamma hyperpriors; the rest follows the usual blocked sampler for a
stick-breaking mixture.
"""

import math
import warnings
from dataclasses import dataclass, field, fields, replace

import numpy as np
from scipy.special import multigammaln

from .diagnostics import effective_sample_size
from .distributions import (LOG_2PI, chol, chol_batch, gamma_logpdf, inverse_diagonal,
                            inverse_diagonal_batch, logdet_batch, make_rng,
                            mvn_logpdf_components, sample_categorical_rows, sample_log_beta,
                            sample_gamma, sample_inverse_wishart_batch)
from .exceptions import ValidationError
from .model import JointComponent, LcwmModel, MissingDataset

# floor for log(1 - nu) when a stick fraction is numerically 1
LOG_STICK_FLOOR = math.log(np.finfo(float).tiny)

MONITORS = ("log_posterior", "mean_y_fill")


@dataclass
class Hyperparams:
    """Prior constants.  ``None`` fields are filled from the data by :meth:`resolve`.

    Defaults: ``f = p + 2``, ``a_delta = p``, ``b_delta = a_delta / var(w_j)``
    (so the prior mean of ``delta_j`` is the sample variance of column ``j``),
    ``mu0`` = column means of the initial completed data.
    """

    G: int = 10
    mu0: object = None
    h: float = 1.0
    f: object = None
    a_eta: float = 0.5
    b_eta: float = 0.5
    a_delta: object = None
    b_delta: object = None
    update_delta: bool = True

    def resolve(self, w):
        w = np.asarray(w, dtype=float)
        p = w.shape[1]
        mu0 = w.mean(axis=0) if self.mu0 is None else np.asarray(self.mu0, dtype=float)
        f = float(p + 2) if self.f is None else float(self.f)
        a_delta = float(p) if self.a_delta is None else float(self.a_delta)
        if self.b_delta is None:
            var = w.var(axis=0, ddof=1) if w.shape[0] > 1 else np.ones(p)
            var = np.where(var > 0, var, 1.0)
            b_delta = a_delta / var
        else:
            b_delta = np.broadcast_to(np.asarray(self.b_delta, dtype=float), (p,)).copy()
        out = replace(self, mu0=mu0, f=f, a_delta=a_delta, b_delta=b_delta)
        out.validate(p)
        return out

    def validate(self, p):
        if int(self.G) < 1:
            raise ValidationError("G must be at least 1")
        if not self.h > 0:
            raise ValidationError("h must be positive")
        if self.f is not None and not self.f > p - 1:
            raise ValidationError(f"f must exceed p - 1 = {p - 1}")
        for name in ("a_eta", "b_eta"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")
        if self.mu0 is not None and np.shape(self.mu0) != (p,):
            raise ValidationError(f"mu0 must have length {p}")
        if self.a_delta is not None and not self.a_delta > 0:
            raise ValidationError("a_delta must be positive")
        if self.b_delta is not None and not np.all(np.asarray(self.b_delta) > 0):
            raise ValidationError("b_delta must be positive")


@dataclass
class McmcConfig:
    burn_in: int = 10_000
    target_ess: float = 1500.0
    max_iterations: int = 200_000
    thin: int = 1
    seed: int = 0
    monitor: tuple = MONITORS
    check_every: int = 500

    def validate(self):
        if self.burn_in < 0:
            raise ValidationError("burn_in must be non-negative")
        if not self.target_ess > 0:
            raise ValidationError("target_ess must be positive")
        if self.thin < 1:
            raise ValidationError("thin must be at least 1")
        if self.max_iterations <= self.burn_in:
            raise ValidationError("max_iterations must exceed burn_in")
        unknown = set(self.monitor) - set(MONITORS)
        if unknown:
            raise ValidationError(f"unknown monitor(s): {sorted(unknown)}")


@dataclass
class GibbsState:
    """Full parameter and latent state after one sweep.

    ``mu`` is ``(G, p)`` and ``sigma`` is ``(G, p, p)``; covariates occupy the
    first ``d`` coordinates and the response the last.
    """

    z: np.ndarray
    z_mis: np.ndarray
    y_fill: np.ndarray
    nu: np.ndarray
    alpha: np.ndarray
    eta: float
    delta: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    log_posterior: float = float("nan")
    iteration: int = 0
    chols: np.ndarray = field(default=None, repr=False)

    @property
    def G(self):
        return self.alpha.shape[0]

    @property
    def components(self):
        return [JointComponent(m, s) for m, s in zip(self.mu, self.sigma)]

    def model(self):
        return LcwmModel.from_joint(self.alpha, self.components)

    def occupied(self):
        return int(np.unique(self.z).shape[0])

    def ensure_chols(self):
        if self.chols is None:
            self.chols = chol_batch(self.sigma)
        return self.chols

    def copy(self):
        kw = {f.name: getattr(self, f.name) for f in fields(self)}
        for k, v in kw.items():
            if isinstance(v, np.ndarray):
                kw[k] = v.copy()
        return GibbsState(**kw)


@dataclass
class Chain:
    """Retained states plus run diagnostics."""

    states: list
    map_index: int
    ess: dict
    occupied: np.ndarray  # occupied-component count at every sweep, burn-in included
    iterations: int
    burn_in: int
    converged: bool
    saturated: bool
    hyper: Hyperparams = None

    @property
    def map_state(self):
        return self.states[self.map_index]

    def trace(self, name):
        if name == "log_posterior":
            return np.array([s.log_posterior for s in self.states])
        if name == "mean_y_fill":
            return np.array([s.y_fill.mean() if s.y_fill.size else 0.0 for s in self.states])
        if name == "occupied":
            return np.array([s.occupied() for s in self.states])
        if name.startswith("alpha_"):
            g = int(name.split("_")[1]) - 1
            return np.array([s.alpha[g] for s in self.states])
        raise KeyError(name)


# ---------------------------------------------------------------------------
# Sweep steps
# ---------------------------------------------------------------------------


def stick_transform(nu):
    """Weights ``alpha_g = nu_g prod_{k<g} (1 - nu_k)``; the last is the residual."""
    nu = np.asarray(nu, dtype=float)
    if nu.ndim != 1 or nu.size < 1:
        raise ValidationError("nu must be a non-empty vector")
    if nu[-1] != 1.0:
        raise ValidationError("the last stick fraction must equal 1 (truncation)")
    if np.any(nu < 0) or np.any(nu > 1):
        raise ValidationError("stick fractions must lie in [0, 1]")
    remaining = np.concatenate([[1.0], np.cumprod(1.0 - nu[:-1])])
    alpha = nu * remaining
    alpha[-1] = max(0.0, 1.0 - float(np.sum(alpha[:-1])))
    return alpha


def inverse_stick(alpha):
    """Stick fractions reproducing ``alpha`` under :func:`stick_transform`."""
    alpha = np.asarray(alpha, dtype=float)
    remaining = 1.0 - np.concatenate([[0.0], np.cumsum(alpha[:-1])])
    with np.errstate(divide="ignore", invalid="ignore"):
        nu = np.where(remaining > 0, alpha / remaining, 1.0)
    nu = np.clip(nu, 0.0, 1.0)
    nu[-1] = 1.0
    return nu


def _categorical_from_log(log_terms, rng):
    top = np.max(log_terms, axis=1, keepdims=True)
    return sample_categorical_rows(np.exp(log_terms - top), rng)


def _log_alpha(alpha):
    with np.errstate(divide="ignore"):
        return np.log(alpha)


def joint_responsibility_terms(w, alpha, mu, chols):
    """``log alpha_g + log phi_p(w_i; mu_g, Sigma_g)`` as an ``(n, G)`` array."""
    return _log_alpha(alpha)[None, :] + mvn_logpdf_components(w, mu, chols)


def update_assignments(data, y_fill, model, rng):
    """Draw a label for every row from ``p(Z | x, y)`` on the completed data."""
    w = data.completed(y_fill)
    if isinstance(model, LcwmModel):
        terms = model.log_joint_terms(w[:, :-1], w[:, -1])
    else:
        alpha, mu, chols = model
        terms = joint_responsibility_terms(w, alpha, mu, chols)
    return _categorical_from_log(terms, rng)


def update_sticks(z, hyper, eta, rng, return_log=False):
    """Conjugate stick-breaking update: ``nu_g ~ Beta(1 + n_g, eta + n_{>g})``.

    Returns ``(nu, alpha)``, plus ``log(1 - nu)`` when ``return_log`` is set;
    the latter is exact even where ``nu`` rounds to 1.
    """
    G = int(hyper.G)
    counts = np.bincount(np.asarray(z, dtype=int), minlength=G)[:G]
    after = np.concatenate([np.cumsum(counts[::-1])[::-1][1:], [0]])
    log_nu = np.zeros(G)
    log1m = np.full(G, -np.inf)
    if G > 1:
        log_nu[:-1], log1m[:-1] = sample_log_beta(1.0 + counts[:-1], eta + after[:-1], rng)
    nu = np.exp(log_nu)
    nu[-1] = 1.0
    log_alpha = log_nu + np.concatenate([[0.0], np.cumsum(log1m[:-1])])
    alpha = np.exp(log_alpha)
    alpha[-1] = max(0.0, 1.0 - float(np.sum(alpha[:-1])))
    if return_log:
        return nu, alpha, log1m
    return nu, alpha


def _log1m_nu(nu):
    with np.errstate(divide="ignore"):
        out = np.log1p(-np.asarray(nu, dtype=float))
    return np.maximum(out, LOG_STICK_FLOOR)


def update_eta(nu, hyper, rng, log1m_nu=None):
    """``eta ~ Gamma(a_eta + G - 1, b_eta - sum_{g<G} log(1 - nu_g))`` (rate form).

    Pass the exact ``log1m_nu`` from :func:`update_sticks` when available;
    otherwise ``log(1 - nu)`` is computed from ``nu`` with a floor of
    ``LOG_STICK_FLOOR`` for fractions that are numerically 1.
    """
    nu = np.asarray(nu, dtype=float)
    terms = _log1m_nu(nu[:-1]) if log1m_nu is None else np.asarray(log1m_nu)[:nu.shape[0] - 1]
    shape = hyper.a_eta + nu.shape[0] - 1
    rate = hyper.b_eta - float(np.sum(terms))
    return float(sample_gamma(shape, rate, rng))


def _sufficient_stats(w, z, G):
    """Counts, means and centred scatter matrices per component."""
    n, p = w.shape
    counts = np.bincount(z, minlength=G)[:G].astype(float)
    center = w.mean(axis=0) if n else np.zeros(p)
    wc = w - center
    onehot = np.zeros((G, n))
    onehot[z, np.arange(n)] = 1.0
    sums = onehot @ wc
    second = (onehot @ (wc[:, :, None] * wc[:, None, :]).reshape(n, p * p)).reshape(G, p, p)
    means_c = sums / np.maximum(counts, 1.0)[:, None]
    scatter = second - counts[:, None, None] * (means_c[:, :, None] * means_c[:, None, :])
    return counts, means_c + center, 0.5 * (scatter + np.swapaxes(scatter, 1, 2))


def _update_components(w, z, hyper, delta, rng):
    G = int(hyper.G)
    p = w.shape[1]
    counts, means, scatter = _sufficient_stats(w, z, G)
    h, mu0 = hyper.h, np.asarray(hyper.mu0, dtype=float)
    dev = means - mu0
    shrink = h * counts / (h + counts)
    psi = (np.diag(np.asarray(delta, dtype=float))[None, :, :] + scatter
           + shrink[:, None, None] * (dev[:, :, None] * dev[:, None, :]))
    centre = (h * mu0[None, :] + counts[:, None] * means) / (h + counts)[:, None]
    sigma = sample_inverse_wishart_batch(hyper.f + counts, psi, rng)
    chols = chol_batch(sigma)
    noise = np.einsum("gij,gj->gi", chols, rng.standard_normal((G, p)))
    mu = centre + noise / np.sqrt(h + counts)[:, None]
    return mu, sigma, chols


def update_components(data, y_fill, z, hyper, delta, rng):
    """Draw ``(Sigma_g, mu_g)`` for every component; empty components come from the prior.

    Returns ``(mu, sigma)`` with shapes ``(G, p)`` and ``(G, p, p)``.
    """
    mu, sigma, _ = _update_components(data.completed(y_fill), np.asarray(z, dtype=int),
                                      hyper, delta, rng)
    return mu, sigma


def update_delta(sigmas, hyper, rng):
    """``delta_j ~ Gamma(a_delta + G f / 2, b_delta + 1/2 sum_g (Sigma_g^{-1})_jj)``.

    An empty collection of components yields a draw from the prior.
    """
    b = np.asarray(hyper.b_delta, dtype=float)
    if len(sigmas) == 0:
        return sample_gamma(hyper.a_delta, b, rng, size=b.shape)
    prec_diag = np.sum([inverse_diagonal(chol(s)) for s in sigmas], axis=0)
    return _draw_delta(prec_diag, len(sigmas), hyper, rng)


def _draw_delta(prec_diag, G, hyper, rng):
    shape = hyper.a_delta + 0.5 * G * hyper.f
    rate = np.asarray(hyper.b_delta, dtype=float) + 0.5 * prec_diag
    return sample_gamma(shape, rate, rng, size=rate.shape)


def _regression_arrays(mu, sigma):
    """Regression-form parameters of stacked joint components.

    Returns ``(chol_xx, b0, b, sigma2)``; the slopes come from two triangular
    solves against the covariate block's Cholesky factor.
    """
    d = mu.shape[1] - 1
    sxy = sigma[:, :d, d]
    L = chol_batch(sigma[:, :d, :d])
    v = np.linalg.solve(L, sxy[:, :, None])
    b = np.linalg.solve(np.swapaxes(L, 1, 2), v)[:, :, 0]
    b0 = mu[:, d] - np.einsum("gi,gi->g", b, mu[:, :d])
    sigma2 = sigma[:, d, d] - np.einsum("gi,gi->g", sxy, b)
    return L, b0, b, sigma2


def _impute(X_mis, alpha, mu_x, chol_xx, b0, b, sigma2, rng):
    n_mis, d = X_mis.shape
    log_terms = np.tile(_log_alpha(alpha), (n_mis, 1))
    if d:
        log_terms = log_terms + mvn_logpdf_components(X_mis, mu_x, chol_xx)
    z_mis = _categorical_from_log(log_terms, rng)
    mean = b0[z_mis]
    if d:
        mean = mean + np.einsum("ij,ij->i", X_mis, b[z_mis])
    y = mean + np.sqrt(sigma2[z_mis]) * rng.standard_normal(n_mis)
    return z_mis, y


def impute_step(data, model, rng):
    """Draw ``z_mis`` from ``p(Z | x)`` and then ``y_mis`` from the chosen regression.

    With no covariates the labels come from ``alpha`` alone.
    """
    X_mis = data.X_mis
    if X_mis.shape[0] == 0:
        return np.zeros(0, dtype=int), np.zeros(0)
    comps = model.components
    d = model.d
    return _impute(X_mis, model.alpha,
                   np.stack([c.mu_x for c in comps]).reshape(model.G, d),
                   np.stack(model._chol_xx).reshape(model.G, d, d),
                   np.array([c.b0 for c in comps]),
                   np.stack([c.b for c in comps]).reshape(model.G, d),
                   np.array([c.sigma2 for c in comps]), rng)


def relabel_sort(state):
    """Permute components so ``alpha`` is decreasing (stable for ties)."""
    order = np.argsort(-state.alpha, kind="stable")
    if np.array_equal(order, np.arange(order.shape[0])):
        return state
    rank = np.empty_like(order)
    rank[order] = np.arange(order.shape[0])
    alpha = state.alpha[order]
    return replace(
        state,
        z=rank[state.z],
        z_mis=rank[state.z_mis],
        alpha=alpha,
        nu=inverse_stick(alpha),
        mu=state.mu[order],
        sigma=state.sigma[order],
        chols=None if state.chols is None else state.chols[order],
    )


def log_posterior(state, data, hyper):
    """Completed-data log posterior used to pick the MAP sweep.

    Likelihood ``sum_i log alpha_{z_i} + log phi_p(w_i; mu_{z_i}, Sigma_{z_i})``
    plus the log prior of every component, the stick fractions, ``eta`` and
    ``delta``.  The stick prior is evaluated on the fractions of the weights
    sorted in decreasing order, which makes the value invariant to relabelling.
    """
    w = data.completed(state.y_fill)
    chols = state.ensure_chols()
    z = np.asarray(state.z, dtype=int)
    n, p = w.shape
    la = _log_alpha(state.alpha)
    dens = mvn_logpdf_components(w, state.mu, chols)
    total = float(np.sum(la[z]) + np.sum(dens[np.arange(n), z]))

    h, f = hyper.h, hyper.f
    delta = np.asarray(state.delta, dtype=float)
    logdet = logdet_batch(chols)
    u = np.linalg.solve(chols, (state.mu - hyper.mu0)[:, :, None])[:, :, 0]
    total += float(np.sum(-0.5 * (p * LOG_2PI + logdet - p * math.log(h)
                                  + h * np.sum(u * u, axis=1))))
    trace = inverse_diagonal_batch(chols) @ delta
    iw = (0.5 * f * float(np.sum(np.log(delta))) - 0.5 * f * p * math.log(2.0)
          - multigammaln(0.5 * f, p) - 0.5 * (f + p + 1) * logdet - 0.5 * trace)
    total += float(np.sum(iw))

    nu = inverse_stick(np.sort(state.alpha)[::-1])[:-1]
    eta = state.eta
    total += float(np.sum(math.log(eta) + (eta - 1.0) * _log1m_nu(nu)))
    total += float(gamma_logpdf(eta, hyper.a_eta, hyper.b_eta))
    total += float(np.sum(gamma_logpdf(delta, hyper.a_delta, np.asarray(hyper.b_delta))))
    return total


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------


def _check_data(data):
    if not isinstance(data, MissingDataset):
        raise ValidationError("run_chain expects a MissingDataset")
    if data.n_missing == data.n:
        raise ValidationError("every response value is missing; nothing to fit")


def initial_labels(w, G):
    """Quantile bins of the first principal axis of the standardised data."""
    n = w.shape[0]
    sd = w.std(axis=0)
    ws = (w - w.mean(axis=0)) / np.where(sd > 0, sd, 1.0)
    if ws.shape[1] > 1:
        _, _, vt = np.linalg.svd(ws, full_matrices=False)
        score = ws @ vt[0]
    else:
        score = ws[:, 0]
    k = max(1, min(int(G), n))
    ranks = np.argsort(np.argsort(score, kind="stable"), kind="stable")
    return (ranks * k // n).astype(int)


def initialize_state(data, hyper, rng):
    """Starting state plus the data-resolved hyperparameters."""
    y_obs = data.y_obs
    sd = y_obs.std(ddof=1) if y_obs.shape[0] > 1 else 1.0
    sd = sd if sd > 0 else 1.0
    y_fill = y_obs.mean() + sd * rng.standard_normal(data.n_missing)
    w = data.completed(y_fill)
    hyper = hyper.resolve(w)
    z = initial_labels(w, hyper.G)
    eta = hyper.a_eta / hyper.b_eta
    delta = hyper.a_delta / np.asarray(hyper.b_delta, dtype=float)
    nu, alpha = update_sticks(z, hyper, eta, rng)
    mu, sigma, chols = _update_components(w, z, hyper, delta, rng)
    state = GibbsState(z=z, z_mis=z[data.mask].copy(), y_fill=y_fill, nu=nu, alpha=alpha,
                       eta=eta, delta=delta, mu=mu, sigma=sigma, chols=chols)
    state.log_posterior = log_posterior(state, data, hyper)
    return state, hyper


def gibbs_sweep(state, data, hyper, rng, score=True):
    """One full sweep; returns a new state.

    With ``score=False`` the log posterior is left as NaN, which saves time
    during burn-in where it is not monitored.
    """
    w = data.completed(state.y_fill)
    chols = state.ensure_chols()
    z = _categorical_from_log(joint_responsibility_terms(w, state.alpha, state.mu, chols), rng)
    nu, alpha, log1m = update_sticks(z, hyper, state.eta, rng, return_log=True)
    mu, sigma, chols = _update_components(w, z, hyper, state.delta, rng)
    eta = update_eta(nu, hyper, rng, log1m_nu=log1m)
    if hyper.update_delta:
        prec_diag = inverse_diagonal_batch(chols).sum(axis=0)
        delta = _draw_delta(prec_diag, hyper.G, hyper, rng)
    else:
        delta = state.delta
    new = GibbsState(z=z, z_mis=state.z_mis, y_fill=state.y_fill, nu=nu, alpha=alpha,
                     eta=eta, delta=delta, mu=mu, sigma=sigma, chols=chols,
                     iteration=state.iteration + 1)
    if data.n_missing:
        d = data.d
        if d:
            chol_xx, b0, b, sigma2 = _regression_arrays(mu, sigma)
        else:
            chol_xx, b0, b, sigma2 = np.zeros((hyper.G, 0, 0)), mu[:, 0], np.zeros((hyper.G, 0)), sigma[:, 0, 0]
        new.z_mis, new.y_fill = _impute(data.X_mis, alpha, mu[:, :d], chol_xx, b0, b, sigma2, rng)
    new = relabel_sort(new)
    new.log_posterior = log_posterior(new, data, hyper) if score else float("nan")
    return new


def _monitor_ess(states, monitors):
    out = {}
    for name in monitors:
        if name == "log_posterior":
            series = [s.log_posterior for s in states]
        else:
            series = [s.y_fill.mean() if s.y_fill.size else 0.0 for s in states]
        est = effective_sample_size(series)
        out[name] = float("inf") if est.degenerate and name == "mean_y_fill" else est.ess
    return out


def run_chain(data, hyper=None, config=None, progress=None):
    """Run the sampler until every monitored scalar reaches ``target_ess``.

    Parameters
    ----------
    data : MissingDataset
    hyper : Hyperparams, optional
    config : McmcConfig, optional
    progress : callable, optional
        Called as ``progress(iteration, state)`` after every sweep.

    Returns
    -------
    Chain
        Post burn-in, thinned states; ``map_index`` points at the state with
        the largest completed-data log posterior.
    """
    _check_data(data)
    hyper = hyper or Hyperparams()
    config = config or McmcConfig()
    config.validate()
    rng = make_rng(config.seed)
    state, hyper = initialize_state(data, hyper, rng)
    G = int(hyper.G)
    occupied = []
    retained = []
    ess = {}
    converged = False
    min_retained = max(20, config.check_every)
    it = 0
    while it < config.max_iterations:
        it += 1
        keep = it > config.burn_in and (it - config.burn_in) % config.thin == 0
        state = gibbs_sweep(state, data, hyper, rng, score=keep)
        occupied.append(state.occupied())
        if progress is not None:
            progress(it, state)
        if not keep:
            continue
        kept = state.copy()
        kept.chols = None
        kept.z = kept.z.astype(np.int16)
        retained.append(kept)
        if len(retained) >= min_retained and len(retained) % config.check_every == 0:
            ess = _monitor_ess(retained, config.monitor)
            if all(v >= config.target_ess for v in ess.values()):
                converged = True
                break
    if not retained:
        raise ValidationError("no states retained; increase max_iterations or lower burn_in")
    if len(retained) >= 10:
        ess = _monitor_ess(retained, config.monitor)
    if not converged:
        warnings.warn(f"target ESS {config.target_ess} not reached after {it} iterations: {ess}",
                      RuntimeWarning, stacklevel=2)
    occupied = np.asarray(occupied, dtype=int)
    # the initial labelling spreads rows over all G bins, so only count
    # sweeps after burn-in
    saturated = bool(np.any(occupied[config.burn_in:] >= G))
    if saturated:
        warnings.warn(f"all G={G} components were occupied in some sweep; consider a larger G",
                      RuntimeWarning, stacklevel=2)
    lp = np.array([s.log_posterior for s in retained])
    return Chain(states=retained, map_index=int(np.argmax(lp)), ess=ess, occupied=occupied,
                 iterations=it, burn_in=config.burn_in, converged=converged,
                 saturated=saturated, hyper=hyper)
