"""Seedable sampling and density primitives used by the Gibbs sampler.

Random streams come from NumPy's ``PCG64`` bit generator driven by a
``SeedSequence``.  Independent replication streams are obtained with
:func:`split_rngs` (``SeedSequence.spawn``), so a Monte Carlo study is
reproducible regardless of the order in which replications are executed.
Streams are deterministic for a fixed NumPy version; bit equality across
NumPy releases or other implementations is not promised.

Conventions
-----------
* ``sample_gamma`` uses the *rate* parameterisation (mean ``shape / rate``).
* ``sample_inverse_wishart(df, scale)`` has mean ``scale / (df - p - 1)``.
"""

import math

import numpy as np
from scipy.linalg import lapack, solve_triangular
from scipy.special import multigammaln

from .exceptions import NotSpdError, ParameterError, ValidationError

RNG_ALGORITHM = "numpy.PCG64/SeedSequence"
LOG_2PI = math.log(2.0 * math.pi)


def make_rng(seed):
    """Return a ``numpy.random.Generator`` seeded from a 64-bit integer."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def split_rngs(seed, n):
    """Return ``n`` statistically independent generators derived from ``seed``."""
    children = np.random.SeedSequence(int(seed)).spawn(int(n))
    return [np.random.Generator(np.random.PCG64(s)) for s in children]


# ---------------------------------------------------------------------------
# Cholesky factor
# ---------------------------------------------------------------------------


def chol(m, sym_tol=1e-10):
    """Lower Cholesky factor ``L`` with ``L @ L.T == m``.

    Raises
    ------
    ValidationError
        If ``m`` is not square or not symmetric within ``sym_tol``.
    NotSpdError
        If a non-positive pivot is met; ``err.pivot`` is its index.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {m.shape}")
    if m.shape[0] == 0:
        return np.zeros((0, 0))
    scale = max(1.0, float(np.max(np.abs(m))))
    if np.max(np.abs(m - m.T)) > sym_tol * scale:
        raise ValidationError("matrix is not symmetric")
    if not np.all(np.isfinite(m)):
        raise NotSpdError(0, "matrix has non-finite entries")
    c, info = lapack.dpotrf(m, lower=1, clean=1)
    if info > 0:
        raise NotSpdError(info - 1)
    if info < 0:  # pragma: no cover - argument error inside LAPACK
        raise ValidationError(f"dpotrf argument {-info} invalid")
    return c


def chol_logdet(L):
    """``log det(L @ L.T)``."""
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def inverse_diagonal(L):
    """Diagonal of ``(L L')^{-1}`` computed by a triangular solve."""
    linv = solve_triangular(L, np.eye(L.shape[0]), lower=True)
    return np.sum(linv * linv, axis=0)


# ---------------------------------------------------------------------------
# Multivariate normal
# ---------------------------------------------------------------------------


def sample_mvn(mean, cov_factor, rng):
    """Draw ``mean + L z`` with ``z`` standard normal."""
    mean = np.asarray(mean, dtype=float)
    z = rng.standard_normal(mean.shape[0])
    return mean + cov_factor @ z


def mvn_logpdf(x, mean, cov_factor):
    """Log density of ``N(mean, L L')`` at ``x``.

    ``x`` may be a single point of shape ``(d,)`` or a batch ``(n, d)``; the
    result is a float or an array of length ``n`` accordingly.
    """
    x = np.asarray(x, dtype=float)
    mean = np.asarray(mean, dtype=float)
    L = np.asarray(cov_factor, dtype=float)
    d = mean.shape[0]
    single = x.ndim == 1
    diff = np.atleast_2d(x) - mean
    if d == 0:
        out = np.zeros(diff.shape[0])
    else:
        u = solve_triangular(L, diff.T, lower=True, check_finite=False)
        out = -0.5 * (d * LOG_2PI + chol_logdet(L) + np.sum(u * u, axis=0))
    return float(out[0]) if single else out


def chol_batch(ms):
    """Stacked lower Cholesky factors of a ``(G, p, p)`` array of SPD matrices."""
    ms = np.asarray(ms, dtype=float)
    try:
        return np.linalg.cholesky(ms)
    except np.linalg.LinAlgError:
        for m in ms:
            chol(m)  # raises NotSpdError with the failing pivot
        raise NotSpdError(0)  # pragma: no cover


def logdet_batch(chols):
    return 2.0 * np.sum(np.log(np.diagonal(chols, axis1=1, axis2=2)), axis=1)


def mvn_logpdf_components(x, means, cov_factors):
    """Matrix of ``log N(x_i; mean_g, L_g L_g')`` with shape ``(n, G)``.

    Whitening uses the inverse of each (small) triangular factor, obtained by
    a triangular solve, so the whole batch reduces to one stacked matmul.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    means = np.asarray(means, dtype=float)
    chols = np.asarray(cov_factors, dtype=float)
    G, p = means.shape
    if p == 0:
        return np.zeros((x.shape[0], G))
    linv = triangular_inverse_batch(chols)
    u = linv @ x.T - (linv @ means[:, :, None])  # (G, p, n)
    maha = np.einsum("gpn,gpn->gn", u, u)
    return (-0.5 * (p * LOG_2PI + logdet_batch(chols)[:, None] + maha)).T


def triangular_inverse_batch(chols):
    """``L_g^{-1}`` for stacked lower-triangular factors."""
    chols = np.asarray(chols, dtype=float)
    eye = np.broadcast_to(np.eye(chols.shape[-1]), chols.shape)
    return np.linalg.solve(chols, eye)


def inverse_diagonal_batch(chols):
    """``(G, p)`` diagonals of ``(L_g L_g')^{-1}``."""
    linv = triangular_inverse_batch(chols)
    return np.sum(linv * linv, axis=1)


# ---------------------------------------------------------------------------
# Wishart family
# ---------------------------------------------------------------------------


def _bartlett_factor(df, p, rng):
    a = np.zeros((p, p))
    a[np.diag_indices(p)] = np.sqrt(rng.chisquare(df - np.arange(p)))
    rows, cols = np.tril_indices(p, -1)
    a[rows, cols] = rng.standard_normal(rows.shape[0])
    return a


def sample_inverse_wishart(df, scale, rng, scale_factor=None):
    """Draw from the inverse-Wishart ``IW(df, scale)``.

    Uses the Bartlett decomposition of the Wishart draw for the precision:
    with ``scale = L L'`` and Bartlett factor ``A`` the returned matrix is
    ``L A^{-T} A^{-1} L'``.  Pass ``scale_factor`` to reuse a known ``L``.
    """
    scale = np.asarray(scale, dtype=float)
    p = scale.shape[0]
    if not df > p - 1:
        raise ParameterError(f"inverse-Wishart needs df > p - 1 (df={df}, p={p})")
    L = chol(scale) if scale_factor is None else scale_factor
    a = _bartlett_factor(df, p, rng)
    t = solve_triangular(a, L.T, lower=True, check_finite=False).T  # L A^{-T}
    s = t @ t.T
    return 0.5 * (s + s.T)


def sample_inverse_wishart_batch(dfs, scales, rng):
    """One inverse-Wishart draw per ``(df_g, scale_g)``; shapes ``(G,)`` and ``(G, p, p)``."""
    scales = np.asarray(scales, dtype=float)
    dfs = np.asarray(dfs, dtype=float)
    G, p, _ = scales.shape
    if np.any(dfs <= p - 1):
        raise ParameterError(f"inverse-Wishart needs df > p - 1 (p={p})")
    L = chol_batch(scales)
    a = np.zeros((G, p, p))
    idx = np.arange(p)
    a[:, idx, idx] = np.sqrt(rng.chisquare(dfs[:, None] - idx[None, :]))
    rows, cols = np.tril_indices(p, -1)
    a[:, rows, cols] = rng.standard_normal((G, rows.shape[0]))
    t = np.transpose(np.linalg.solve(a, np.transpose(L, (0, 2, 1))), (0, 2, 1))
    s = t @ np.transpose(t, (0, 2, 1))
    return 0.5 * (s + np.transpose(s, (0, 2, 1)))


def inverse_wishart_logpdf(sigma_factor, df, scale_diag):
    """Log density of ``IW(df, diag(scale_diag))`` at ``Sigma = L L'``."""
    L = sigma_factor
    p = L.shape[0]
    delta = np.asarray(scale_diag, dtype=float)
    logdet_sigma = chol_logdet(L)
    trace_term = float(np.dot(delta, inverse_diagonal(L)))
    return (0.5 * df * float(np.sum(np.log(delta))) - 0.5 * df * p * math.log(2.0)
            - multigammaln(0.5 * df, p) - 0.5 * (df + p + 1) * logdet_sigma
            - 0.5 * trace_term)


# ---------------------------------------------------------------------------
# Scalar draws
# ---------------------------------------------------------------------------


def sample_beta(a, b, rng, size=None):
    if not (np.all(np.asarray(a) > 0) and np.all(np.asarray(b) > 0)):
        raise ParameterError(f"Beta parameters must be positive (a={a}, b={b})")
    return rng.beta(a, b, size=size)


def sample_log_beta(a, b, rng):
    """Draw ``nu ~ Beta(a, b)`` returned as ``(log(nu), log(1 - nu))``.

    Both logs come from log-gamma variates (``log G_a = log G_{a+1} + log(U)/a``),
    so neither underflows when a shape parameter is tiny and ``nu`` is within
    machine precision of 0 or 1.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if not (np.all(a > 0) and np.all(b > 0)):
        raise ParameterError("Beta parameters must be positive")
    a, b = np.broadcast_arrays(a, b)
    lga = np.log(rng.gamma(a + 1.0)) + np.log(rng.random(a.shape)) / a
    lgb = np.log(rng.gamma(b + 1.0)) + np.log(rng.random(b.shape)) / b
    norm = np.logaddexp(lga, lgb)
    return lga - norm, lgb - norm


def sample_gamma(shape, rate, rng, size=None):
    """Gamma draw with mean ``shape / rate``."""
    if not (np.all(np.asarray(shape) > 0) and np.all(np.asarray(rate) > 0)):
        raise ParameterError(f"Gamma parameters must be positive (shape={shape}, rate={rate})")
    return rng.gamma(shape, 1.0 / np.asarray(rate, dtype=float), size=size)


def gamma_logpdf(x, shape, rate):
    x = np.asarray(x, dtype=float)
    return shape * np.log(rate) - math.lgamma(shape) + (shape - 1.0) * np.log(x) - rate * x


def sample_categorical(weights, rng):
    """Index drawn with probabilities ``weights`` (must sum to one)."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
        raise ParameterError("categorical weights must be a probability vector")
    cdf = np.cumsum(w)
    idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(idx, w.shape[0] - 1)


def sample_categorical_rows(probs, rng):
    """Vectorised categorical draw, one index per row of ``probs``."""
    probs = np.asarray(probs, dtype=float)
    cdf = np.cumsum(probs, axis=1)
    u = rng.random(probs.shape[0])[:, None] * cdf[:, -1:]
    idx = np.sum(cdf <= u, axis=1)
    # zero-probability columns can never be picked, even at u == cdf boundaries
    return np.minimum(idx, probs.shape[1] - 1)
