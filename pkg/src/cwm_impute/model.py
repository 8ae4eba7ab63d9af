"""Domain types and the Gaussian linear cluster-weighted model (LCWM).

A joint Gaussian component for ``w = (x, y)`` is stored with the covariates in
positions ``0..d-1`` and the response in position ``d``.  The same component
can be read as a marginal ``N(mu_x, Sigma_xx)`` for the covariates times a
linear-Gaussian regression ``y | x ~ N(b0 + b.x, sigma2)``; the two views are
connected by :func:`fmm_to_lcwm` and :func:`lcwm_to_fmm`.

All densities and responsibilities are computed in log space.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve
from scipy.special import logsumexp

from .distributions import LOG_2PI, chol, mvn_logpdf
from .exceptions import DegenerateDimensionError, ValidationError


@dataclass
class MissingDataset:
    """Fully observed covariates ``X`` with a partially observed response ``y``.

    ``mask[i]`` is True when ``y[i]`` is missing; the stored value at masked
    positions is ignored (conventionally NaN).
    """

    X: np.ndarray
    y: np.ndarray
    mask: np.ndarray
    column_names: list = field(default_factory=list)

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float).reshape(-1)
        n = self.y.shape[0]
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(n, -1) if X.size else np.zeros((n, 0))
        self.X = X
        self.mask = np.asarray(self.mask, dtype=bool).reshape(-1)
        if n < 1:
            raise ValidationError("dataset needs at least one row")
        if self.X.shape[0] != n or self.mask.shape[0] != n:
            raise ValidationError("X, y and mask must have the same number of rows")
        if not np.all(np.isfinite(self.X)):
            raise ValidationError("covariates must be fully observed and finite")
        if not np.all(np.isfinite(self.y[~self.mask])):
            raise ValidationError("observed y values must be finite")
        if not self.column_names:
            self.column_names = [f"x{j + 1}" for j in range(self.d)] + ["y"]
        if len(self.column_names) != self.d + 1:
            raise ValidationError("column_names must list the d covariates then the response")

    @property
    def n(self):
        return self.y.shape[0]

    @property
    def d(self):
        return self.X.shape[1]

    @property
    def y_obs(self):
        return self.y[~self.mask]

    @property
    def X_obs(self):
        return self.X[~self.mask]

    @property
    def X_mis(self):
        return self.X[self.mask]

    @property
    def n_missing(self):
        return int(self.mask.sum())

    def select(self, columns):
        """Dataset restricted to the named covariate columns (response kept)."""
        names = self.column_names[:-1]
        missing = [c for c in columns if c not in names]
        if missing:
            raise ValidationError(f"unknown covariate column(s): {', '.join(missing)}")
        idx = [names.index(c) for c in columns]
        return MissingDataset(self.X[:, idx], self.y.copy(), self.mask.copy(),
                              [names[i] for i in idx] + [self.column_names[-1]])

    def completed(self, y_fill):
        """Joint matrix ``w = [X, y]`` with masked responses replaced by ``y_fill``."""
        y = self.y.copy()
        y[self.mask] = y_fill
        return np.column_stack([self.X, y])


@dataclass(frozen=True)
class JointComponent:
    """Gaussian component for ``w = (x, y)`` in joint (FMM) form."""

    mu_w: np.ndarray
    sigma_w: np.ndarray

    @property
    def d(self):
        return self.mu_w.shape[0] - 1


@dataclass(frozen=True)
class LcwmComponent:
    """Gaussian component in regression (LCWM) form."""

    mu_x: np.ndarray
    sigma_xx: np.ndarray
    b0: float
    b: np.ndarray
    sigma2: float

    @property
    def d(self):
        return self.mu_x.shape[0]


@dataclass(frozen=True)
class MixtureWeights:
    alpha: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=float)
        if a.ndim != 1 or a.size < 1 or np.any(a < 0) or abs(a.sum() - 1.0) > 1e-12:
            raise ValidationError("mixture weights must be a non-negative vector summing to 1")
        object.__setattr__(self, "alpha", a)

    @property
    def G(self):
        return self.alpha.shape[0]


def fmm_to_lcwm(c):
    """Map a joint Gaussian component to its marginal-times-regression form."""
    mu = np.asarray(c.mu_w, dtype=float)
    sigma = np.asarray(c.sigma_w, dtype=float)
    d = mu.shape[0] - 1
    if d == 0:
        raise DegenerateDimensionError("no covariates: use the marginal-only model")
    chol(sigma)  # validates SPD of the full block
    sxx = sigma[:d, :d]
    sxy = sigma[:d, d]
    L = chol(sxx)
    b = cho_solve((L, True), sxy)
    b0 = float(mu[d] - b @ mu[:d])
    sigma2 = float(sigma[d, d] - sxy @ b)
    return LcwmComponent(mu[:d].copy(), sxx.copy(), b0, b, sigma2)


def lcwm_to_fmm(c):
    """Inverse of :func:`fmm_to_lcwm`."""
    sxx = np.asarray(c.sigma_xx, dtype=float)
    b = np.asarray(c.b, dtype=float)
    mu_x = np.asarray(c.mu_x, dtype=float)
    d = mu_x.shape[0]
    sxy = sxx @ b
    sigma = np.empty((d + 1, d + 1))
    sigma[:d, :d] = sxx
    sigma[:d, d] = sxy
    sigma[d, :d] = sxy
    sigma[d, d] = c.sigma2 + b @ sxx @ b
    mu = np.append(mu_x, c.b0 + b @ mu_x)
    return JointComponent(mu, sigma)


def conditional_predictive(x, c):
    """Mean and variance of ``y | x`` under one regression component."""
    return float(c.b0 + np.dot(c.b, x)), float(c.sigma2)


class LcwmModel:
    """Gaussian LCWM: mixture weights plus ``G`` regression-form components.

    The model keeps both parameterisations; construct it from either with
    :meth:`from_joint` or :meth:`from_lcwm`.  Covariate marginals use Cholesky
    factors cached at construction.
    """

    def __init__(self, weights, components):
        if not isinstance(weights, MixtureWeights):
            weights = MixtureWeights(weights)
        if len(components) != weights.G or weights.G < 1:
            raise ValidationError("need one component per mixture weight")
        self.weights = weights
        self.components = list(components)
        self.d = self.components[0].d
        self._chol_xx = [chol(c.sigma_xx) if self.d else np.zeros((0, 0))
                         for c in self.components]
        for c in self.components:
            if not c.sigma2 > 0:
                raise ValidationError("conditional variance must be positive")

    @classmethod
    def from_joint(cls, alpha, joint_components):
        joint_components = list(joint_components)
        d = joint_components[0].d
        if d == 0:
            comps = [LcwmComponent(np.zeros(0), np.zeros((0, 0)), float(c.mu_w[0]),
                                   np.zeros(0), float(c.sigma_w[0, 0]))
                     for c in joint_components]
        else:
            comps = [fmm_to_lcwm(c) for c in joint_components]
        return cls(alpha, comps)

    @classmethod
    def from_lcwm(cls, alpha, components):
        return cls(alpha, components)

    @property
    def alpha(self):
        return self.weights.alpha

    @property
    def G(self):
        return self.weights.G

    def joint_components(self):
        if self.d == 0:
            return [JointComponent(np.array([c.b0]), np.array([[c.sigma2]]))
                    for c in self.components]
        return [lcwm_to_fmm(c) for c in self.components]

    def _log_alpha(self):
        with np.errstate(divide="ignore"):
            return np.log(self.alpha)

    def log_marginal_x(self, X):
        """``(n, G)`` matrix of ``log phi_d(x_i; mu_g, Sigma_g)``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.d == 0:
            return np.zeros((X.shape[0], self.G))
        return np.column_stack([mvn_logpdf(X, c.mu_x, L)
                                for c, L in zip(self.components, self._chol_xx)])

    def log_conditional_y(self, X, y):
        """``(n, G)`` matrix of ``log phi_1(y_i; b0_g + b_g.x_i, sigma2_g)``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        b0 = np.array([c.b0 for c in self.components])
        s2 = np.array([c.sigma2 for c in self.components])
        mean = b0[None, :] + (X @ np.column_stack([c.b for c in self.components])
                              if self.d else 0.0)
        r = y[:, None] - mean
        return -0.5 * (LOG_2PI + np.log(s2)[None, :] + r * r / s2[None, :])

    def log_joint_terms(self, X, y):
        """``log alpha_g + log phi_d(x) + log phi_1(y|x)`` for each row and component."""
        return self._log_alpha()[None, :] + self.log_marginal_x(X) + self.log_conditional_y(X, y)


def _as_batch(x, d):
    """Return ``(X, single)``: a 2-D batch view and whether one point was given."""
    x = np.asarray(x if x is not None else np.zeros(0), dtype=float)
    if x.ndim == 2:
        if x.shape[1] != d:
            raise ValidationError(f"expected {d} covariate column(s), got {x.shape[1]}")
        return x, False
    x = x.reshape(-1)
    if x.shape[0] == d:
        return x.reshape(1, d), True
    if d == 1:
        return x.reshape(-1, 1), False
    raise ValidationError(f"cannot interpret covariate input of shape {x.shape} for d={d}")


def _normalize(log_terms):
    log_norm = logsumexp(log_terms, axis=1, keepdims=True)
    p = np.exp(log_terms - log_norm)
    return p / p.sum(axis=1, keepdims=True)


def lcwm_joint_logdensity(x, y, m):
    """Log of the LCWM density ``p(x, y)``; vectorised over rows of ``x``."""
    X, single = _as_batch(x, m.d)
    out = logsumexp(m.log_joint_terms(X, y), axis=1)
    return float(out[0]) if single else out


def posterior_z_given_xy(x, y, m):
    """Responsibilities ``p(Z | x, y)``; shape ``(G,)`` or ``(n, G)``."""
    X, single = _as_batch(x, m.d)
    p = _normalize(m.log_joint_terms(X, y))
    return p[0] if single else p


def posterior_z_given_x(x, m):
    """Covariate-only responsibilities ``p(Z | x)``; returns ``alpha`` when d = 0."""
    X, single = _as_batch(x, m.d)
    if m.d == 0:
        p = np.tile(m.alpha, (X.shape[0], 1))
    else:
        p = _normalize(m._log_alpha()[None, :] + m.log_marginal_x(X))
    return p[0] if single else p


def fmm_logdensity(w, alpha, joint_components):
    """Log density of a mixture of joint Gaussians (reference path for tests)."""
    w = np.atleast_2d(np.asarray(w, dtype=float))
    with np.errstate(divide="ignore"):
        la = np.log(np.asarray(alpha, dtype=float))
    terms = la[None, :] + np.column_stack(
        [mvn_logpdf(w, c.mu_w, chol(c.sigma_w)) for c in joint_components])
    return logsumexp(terms, axis=1)


def fmm_responsibilities(w, alpha, joint_components):
    w = np.atleast_2d(np.asarray(w, dtype=float))
    with np.errstate(divide="ignore"):
        la = np.log(np.asarray(alpha, dtype=float))
    terms = la[None, :] + np.column_stack(
        [mvn_logpdf(w, c.mu_w, chol(c.sigma_w)) for c in joint_components])
    return _normalize(terms)
