"""MCMC convergence summaries."""

from typing import NamedTuple

import numpy as np


class EssEstimate(NamedTuple):
    ess: float
    degenerate: bool  # True when the series is constant and ESS is undefined


def autocorrelation(x):
    """Sample autocorrelation at all lags (FFT, biased normalisation)."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    xc = x - x.mean()
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, nfft)
    acov = np.fft.irfft(f * np.conjugate(f), nfft)[:n] / n
    return acov / acov[0]


def effective_sample_size(series):
    """Effective sample size with Geyer's initial positive sequence.

    Autocorrelations are summed in adjacent pairs ``rho_{2k} + rho_{2k+1}``
    until the first non-positive pair.  The integrated autocorrelation time is
    floored at ``1 / log10(n)`` so anti-correlated chains report ESS > n
    without blowing up.
    """
    x = np.asarray(series, dtype=float)
    n = x.shape[0]
    if n < 10:
        raise ValueError("effective_sample_size needs at least 10 draws")
    if not np.all(np.isfinite(x)):
        raise ValueError("series contains non-finite values")
    if np.ptp(x) == 0.0 or np.var(x) <= 1e-300:
        return EssEstimate(0.0, True)
    rho = autocorrelation(x)
    m = (n - 1) // 2
    pairs = rho[0:2 * m:2] + rho[1:2 * m + 1:2]
    nonpos = np.nonzero(pairs <= 0.0)[0]
    k = nonpos[0] if nonpos.size else pairs.shape[0]
    tau = -1.0 + 2.0 * float(np.sum(pairs[:k]))
    tau = max(tau, 1.0 / np.log10(n))
    return EssEstimate(n / tau, False)
