"""Distributional evaluation of a completed response.

A completed variable is summarised by a univariate Gaussian mixture ``g``
fitted by EM, compared with the true marginal ``f`` through the
Kullback-Leibler divergence ``KL(f, g) = int f log(f / g)``, and judged
against a reference interval built from replications of genuinely complete
samples drawn from ``f``.
"""

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.optimize import linear_sum_assignment

from .distributions import LOG_2PI, make_rng, split_rngs
from .exceptions import DegenerateFitError, NumericalError, ValidationError

WI = "WI"
KL_WINDOW_SDS = 12.0


def _lse_rows(a):
    m = np.max(a, axis=-1, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    return np.log(np.sum(np.exp(a - m), axis=-1)) + m[..., 0]


# exp() underflows below this; integrand terms there are treated as zero
_LOG_UNDERFLOW = -745.0


@dataclass(frozen=True)
class UnivariateGmm:
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        m = np.atleast_1d(np.asarray(self.means, dtype=float))
        v = np.atleast_1d(np.asarray(self.variances, dtype=float))
        if not (w.shape == m.shape == v.shape) or w.ndim != 1 or w.size < 1:
            raise ValidationError("weights, means and variances must be equal-length vectors")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValidationError("mixture weights must be non-negative and sum to 1")
        if not (np.all(np.isfinite(m)) and np.all(v > 0) and np.all(np.isfinite(v))):
            raise ValidationError("means must be finite and variances positive")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "variances", v)

    @property
    def G(self):
        return self.weights.shape[0]

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        r = x[..., None] - self.means
        with np.errstate(divide="ignore"):
            lw = np.log(self.weights)
        terms = lw - 0.5 * (LOG_2PI + np.log(self.variances) + r * r / self.variances)
        return _lse_rows(terms)

    def sample(self, n, rng):
        z = np.searchsorted(np.cumsum(self.weights), rng.random(n) * self.weights.sum(),
                            side="right")
        z = np.minimum(z, self.G - 1)
        return self.means[z] + np.sqrt(self.variances[z]) * rng.standard_normal(n)

    def to_dict(self):
        return {"weights": self.weights.tolist(), "means": self.means.tolist(),
                "variances": self.variances.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["weights"], d["means"], d["variances"])


@dataclass
class EmConfig:
    """EM settings for :func:`fit_gmm_em`."""

    restarts: int = 10
    tol: float = 1e-8
    max_iter: int = 1000
    var_floor: float = 1e-6  # relative to the sample variance


@dataclass
class EmResult:
    gmm: UnivariateGmm
    loglik: float
    history: list = field(default_factory=list)  # log-likelihood per iteration, best run
    collapsed: int = 0  # restarts abandoned because a variance hit the floor


def _em_run(y, means, var0, G, cfg, floor):
    n = y.shape[0]
    weights = np.full(G, 1.0 / G)
    variances = np.full(G, var0)
    history = []
    prev = -np.inf
    for _ in range(cfg.max_iter):
        r = y[:, None] - means
        logp = np.log(weights) - 0.5 * (LOG_2PI + np.log(variances) + r * r / variances)
        lse = _lse_rows(logp)
        ll = float(np.sum(lse))
        history.append(ll)
        if abs(ll - prev) < cfg.tol * abs(ll):
            break
        prev = ll
        resp = np.exp(logp - lse[:, None])
        nk = resp.sum(axis=0)
        if np.any(nk <= 1e-10 * n):
            return None
        weights = nk / n
        means = (resp.T @ y) / nk
        r = y[:, None] - means
        variances = np.einsum("ik,ik->k", resp, r * r) / nk
        if np.any(variances < floor):
            return None
    return UnivariateGmm(weights, means, variances), history[-1], history


def fit_gmm_em(y, G, cfg=None, rng=None):
    """Maximum-likelihood univariate Gaussian mixture by EM with restarts.

    The first run starts from evenly spaced sample quantiles; further runs
    start from randomly chosen data points.  A run whose variance collapses
    below ``cfg.var_floor * var(y)`` is abandoned.

    Returns
    -------
    EmResult
        Best run by final log-likelihood with its per-iteration history.

    Raises
    ------
    DegenerateFitError
        If every restart collapsed.
    """
    cfg = cfg or EmConfig()
    y = np.asarray(y, dtype=float).reshape(-1)
    G = int(G)
    if G < 1 or y.shape[0] <= 2 * G:
        raise ValidationError(f"EM needs n > 2G (n={y.shape[0]}, G={G})")
    if not np.all(np.isfinite(y)):
        raise ValidationError("EM input must be finite")
    var0 = float(np.var(y))
    if var0 <= 0:
        raise DegenerateFitError("EM input has zero variance")
    rng = make_rng(0) if rng is None else make_rng(rng)
    floor = cfg.var_floor * var0
    best = None
    collapsed = 0
    for k in range(max(1, int(cfg.restarts))):
        if k == 0:
            starts = np.quantile(y, (np.arange(G) + 0.5) / G)
        else:
            starts = y[rng.choice(y.shape[0], size=G, replace=False)]
        out = _em_run(y, np.array(starts, dtype=float), var0, G, cfg, floor)
        if out is None:
            collapsed += 1
            continue
        if best is None or out[1] > best[1]:
            best = out
    if best is None:
        raise DegenerateFitError(f"all {cfg.restarts} EM restarts collapsed")
    gmm, ll, history = best
    order = np.argsort(gmm.means, kind="stable")
    gmm = UnivariateGmm(gmm.weights[order], gmm.means[order], gmm.variances[order])
    return EmResult(gmm, ll, history, collapsed)


def _scalar_terms(m):
    with np.errstate(divide="ignore"):
        c = np.log(m.weights) - 0.5 * (LOG_2PI + np.log(m.variances))
    return [(float(a), float(mu), 0.5 / float(v)) for a, mu, v in zip(c, m.means, m.variances)
            if math.isfinite(a)]


def _scalar_logpdf(x, terms):
    vals = [c - h * (x - mu) ** 2 for c, mu, h in terms]
    top = max(vals)
    return top + math.log(sum(math.exp(v - top) for v in vals))


def kl_divergence(f, g, tol=1e-9):
    """``KL(f, g)`` between univariate Gaussian mixtures by adaptive quadrature.

    The integrand ``f (log f - log g)`` is evaluated in log space and
    integrated over ``[min(mu - 12 sd), max(mu + 12 sd)]`` taken over the
    components of both mixtures, split at the component means.
    """
    sd = np.sqrt(np.concatenate([f.variances, g.variances]))
    mu = np.concatenate([f.means, g.means])
    lo = float(np.min(mu - KL_WINDOW_SDS * sd))
    hi = float(np.max(mu + KL_WINDOW_SDS * sd))
    cuts = np.unique(np.concatenate([[lo, hi], mu, f.means - 3 * np.sqrt(f.variances),
                                     f.means + 3 * np.sqrt(f.variances)]))
    cuts = cuts[(cuts >= lo) & (cuts <= hi)]

    fc = _scalar_terms(f)
    gc = _scalar_terms(g)

    def integrand(x):
        lf = _scalar_logpdf(x, fc)
        if lf < _LOG_UNDERFLOW:
            return 0.0
        lg = max(_scalar_logpdf(x, gc), -1e300)
        v = math.exp(lf) * (lf - lg)
        if not math.isfinite(v):
            raise NumericalError(f"non-finite KL integrand at x={x} (log f={lf}, log g={lg})")
        return v

    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        val, _ = integrate.quad(integrand, a, b, epsabs=tol / len(cuts), epsrel=1e-10, limit=200)
        total += val
    return float(total)


def _replicate(args):
    truth, n, fit_cfg, rng = args
    y = truth.sample(n, rng)
    try:
        fit = fit_gmm_em(y, truth.G, fit_cfg, rng)
    except DegenerateFitError:
        return None
    return kl_divergence(truth, fit.gmm)


def worker_count(workers=None):
    """Worker processes to use; ``CWM_IMPUTE_THREADS`` caps the default."""
    if workers is None:
        env = os.environ.get("CWM_IMPUTE_THREADS")
        workers = int(env) if env else 1
    return max(1, int(workers))


def kl_replications(truth, n, N, fit_cfg=None, seed=0, workers=None):
    """KL values of ``N`` complete samples of size ``n`` drawn from ``truth``.

    Each replication owns a stream split from ``seed``, so results do not
    depend on scheduling.  Failed fits are skipped and counted.

    Returns
    -------
    (values, skipped)
    """
    if int(N) < 1:
        raise ValidationError("N must be at least 1")
    jobs = [(truth, int(n), fit_cfg, r) for r in split_rngs(seed, int(N))]
    workers = worker_count(workers)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(_replicate, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        out = [_replicate(j) for j in jobs]
    values = np.array([v for v in out if v is not None])
    skipped = len(out) - values.shape[0]
    if skipped > 0.01 * len(out):
        raise DegenerateFitError(f"{skipped} of {len(out)} reference fits failed (limit 1%)")
    return values, skipped


def kl_quantile_interval(truth, n, N, level=0.95, fit_cfg=None, seed=0, workers=None):
    """Reference interval ``(0, q_level)`` of KL values for complete samples."""
    if not 0.0 < level <= 1.0:
        raise ValidationError("level must lie in (0, 1]")
    values, _ = kl_replications(truth, n, N, fit_cfg, seed, workers)
    return 0.0, float(np.quantile(values, level))


def relative_distance(kl, interval):
    """``WI`` when ``kl`` lies within the interval, else ``kl / hi``."""
    lo, hi = interval
    if lo > hi:
        raise ValidationError("interval endpoints out of order")
    if kl <= hi:
        return WI
    if hi <= 0.0:
        raise ValidationError("relative distance is undefined for an interval ending at 0")
    return float(kl) / float(hi)


@dataclass
class KlReport:
    method: str
    kl: float
    interval: tuple
    relative_distance: object = None  # float, or WI

    def __post_init__(self):
        if self.interval[0] > self.interval[1]:
            raise ValidationError("interval endpoints out of order")
        if self.relative_distance is None:
            self.relative_distance = relative_distance(self.kl, self.interval)

    @property
    def within(self):
        return self.relative_distance == WI

    def to_dict(self):
        return {"method": self.method, "kl": self.kl, "interval": list(self.interval),
                "relative_distance_or_WI": self.relative_distance}

    CSV_HEADER = ("method", "kl", "interval_lo", "interval_hi", "relative_distance")

    def csv_row(self):
        rd = self.relative_distance if self.within else repr(float(self.relative_distance))
        return (self.method, repr(float(self.kl)), repr(float(self.interval[0])),
                repr(float(self.interval[1])), rd)


def evaluate_completed(y_completed, truth, interval, method="", G=None, fit_cfg=None, seed=0):
    """Fit ``g`` to a completed variable and report ``KL(truth, g)`` against ``interval``."""
    fit = fit_gmm_em(y_completed, G or truth.G, fit_cfg, make_rng(seed))
    return KlReport(method, kl_divergence(truth, fit.gmm), tuple(interval))


def align_to_truth(estimated_means, true_means):
    """Index of the estimated component matched to each true component.

    Means are vectors of length G (one coordinate each) or ``(G, k)``
    arrays.  Matching minimises the total absolute distance between means
    (Hungarian assignment), so the result is invariant to how the
    estimated components happen to be ordered.
    """
    est = np.asarray(estimated_means, dtype=float)
    tru = np.asarray(true_means, dtype=float)
    est = est[:, None] if est.ndim == 1 else est
    tru = tru[:, None] if tru.ndim == 1 else tru
    if est.shape[0] < tru.shape[0]:
        raise ValidationError("fewer estimated components than true ones")
    cost = np.abs(tru[:, None, :] - est[None, :, :]).sum(axis=2)
    rows, cols = linear_sum_assignment(cost)
    out = np.empty(tru.shape[0], dtype=int)
    out[rows] = cols
    return out
