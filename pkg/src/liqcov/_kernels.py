"""Hot recursion kernels for the volatility/correlation likelihoods.

The conditional-variance and conditional-correlation recursions are evaluated
thousands of times per rolling window by the likelihood optimizer, so they get
two interchangeable implementations:

* a scalar-loop version compiled with ``numba.njit`` (default when numba is
  importable), and
* a vectorized numpy/scipy fallback built on ``scipy.signal.lfilter`` (the
  recursions are linear in their state, so the filter form is exact).

Set ``LIQCOV_NO_NUMBA=1`` in the environment to force the fallback path.
``benchmarks/bench_kernels.py`` times the two side by side.

Both paths implement the same math; results agree to float round-off (the
summation order differs, so bit-identical equality is only guaranteed within
one path).
"""

from __future__ import annotations

import math
import os

import numpy as np
from scipy.signal import lfilter

LOG_2PI = math.log(2.0 * math.pi)

_ENV_OFF = os.environ.get("LIQCOV_NO_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    njit = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not _ENV_OFF


# ---------------------------------------------------------------------------
# scalar-loop implementations (numba-compilable)
# ---------------------------------------------------------------------------

def _garch11_filter_loop(eps2, omega, alpha, beta, h2_0):
    n = eps2.shape[0]
    h2 = np.empty(n)
    h2[0] = h2_0
    for t in range(1, n):
        h2[t] = omega + alpha * eps2[t - 1] + beta * h2[t - 1]
    return h2


def _garch11_negloglik_loop(eps2, omega, alpha, beta, h2_0):
    n = eps2.shape[0]
    h2 = h2_0
    nll = 0.0
    for t in range(n):
        if t > 0:
            h2 = omega + alpha * eps2[t - 1] + beta * h2
        if not (h2 > 0.0) or not np.isfinite(h2):
            return np.inf
        nll += 0.5 * (LOG_2PI + np.log(h2) + eps2[t] / h2)
    return nll


def _corr_negloglik_loop(xi, xneg, obar, nbar, a, b, g):
    """Gaussian negative log-likelihood of the correlation recursion.

    Q_1 = obar; Q_t = (1-a-b)*obar - g*nbar + a x x' + b Q_{t-1} + g m m'
    with x, m the (lagged) standardized and negative-part residuals.  Each
    Q_t is rescaled to unit diagonal before entering the likelihood.  Returns
    (nll, Q_last); nll is +inf when any rescaled matrix fails to be positive
    definite.  The 2*pi constant is excluded (it cancels in comparisons).
    """
    n, dim = xi.shape
    q = obar.copy()
    chol = np.empty((dim, dim))
    p = np.empty((dim, dim))
    d = np.empty(dim)
    y = np.empty(dim)
    nll = 0.0
    for t in range(n):
        if t > 0:
            for i in range(dim):
                for j in range(dim):
                    q[i, j] = (
                        (1.0 - a - b) * obar[i, j]
                        - g * nbar[i, j]
                        + a * xi[t - 1, i] * xi[t - 1, j]
                        + b * q[i, j]
                        + g * xneg[t - 1, i] * xneg[t - 1, j]
                    )
        for i in range(dim):
            qii = q[i, i]
            if not (qii > 0.0) or not np.isfinite(qii):
                return np.inf, q
            d[i] = 1.0 / np.sqrt(qii)
        for i in range(dim):
            for j in range(dim):
                p[i, j] = q[i, j] * d[i] * d[j]
        logdet = 0.0
        for i in range(dim):
            for j in range(i + 1):
                s = p[i, j]
                for k in range(j):
                    s -= chol[i, k] * chol[j, k]
                if i == j:
                    if s <= 1e-14:
                        return np.inf, q
                    chol[i, i] = np.sqrt(s)
                    logdet += 2.0 * np.log(chol[i, i])
                else:
                    chol[i, j] = s / chol[j, j]
        quad = 0.0
        for i in range(dim):
            s = xi[t, i]
            for k in range(i):
                s -= chol[i, k] * y[k]
            y[i] = s / chol[i, i]
            quad += y[i] * y[i]
        nll += 0.5 * (logdet + quad)
    return nll, q


# ---------------------------------------------------------------------------
# vectorized numpy/scipy fallbacks
# ---------------------------------------------------------------------------

def _garch11_filter_numpy(eps2, omega, alpha, beta, h2_0):
    n = eps2.shape[0]
    h2 = np.empty(n)
    h2[0] = h2_0
    if n > 1:
        drive = omega + alpha * eps2[:-1]
        h2[1:] = lfilter([1.0], [1.0, -beta], drive, zi=np.array([beta * h2_0]))[0]
    return h2


def _garch11_negloglik_numpy(eps2, omega, alpha, beta, h2_0):
    h2 = _garch11_filter_numpy(eps2, omega, alpha, beta, h2_0)
    if not np.all(np.isfinite(h2)) or np.any(h2 <= 0.0):
        return np.inf
    return 0.5 * float(np.sum(LOG_2PI + np.log(h2) + eps2 / h2))


def _corr_filter_numpy(xi, xneg, obar, nbar, a, b, g):
    n, dim = xi.shape
    q = np.empty((n, dim, dim))
    q[0] = obar
    if n > 1:
        intercept = (1.0 - a - b) * obar - g * nbar
        shocks = a * np.einsum("ti,tj->tij", xi[:-1], xi[:-1])
        if g != 0.0:
            shocks += g * np.einsum("ti,tj->tij", xneg[:-1], xneg[:-1])
        drive = (intercept[None, :, :] + shocks).reshape(n - 1, dim * dim)
        zi = (b * obar).reshape(1, dim * dim)
        q[1:] = lfilter([1.0], [1.0, -b], drive, axis=0, zi=zi)[0].reshape(n - 1, dim, dim)
    return q


def _corr_negloglik_numpy(xi, xneg, obar, nbar, a, b, g):
    q = _corr_filter_numpy(xi, xneg, obar, nbar, a, b, g)
    diag = np.diagonal(q, axis1=1, axis2=2)
    if not np.all(np.isfinite(diag)) or np.any(diag <= 0.0):
        return np.inf, q[-1]
    scale = 1.0 / np.sqrt(diag)
    p = q * scale[:, :, None] * scale[:, None, :]
    try:
        chol = np.linalg.cholesky(p)
    except np.linalg.LinAlgError:
        return np.inf, q[-1]
    logdet = 2.0 * np.sum(np.log(np.diagonal(chol, axis1=1, axis2=2)), axis=1)
    y = np.linalg.solve(chol, xi[:, :, None])[:, :, 0]
    quad = np.sum(y * y, axis=1)
    return 0.5 * float(np.sum(logdet + quad)), q[-1]


# ---------------------------------------------------------------------------
# path selection
# ---------------------------------------------------------------------------

if HAVE_NUMBA:
    _garch11_filter_jit = njit(cache=True, nogil=True)(_garch11_filter_loop)
    _garch11_negloglik_jit = njit(cache=True, nogil=True)(_garch11_negloglik_loop)
    _corr_negloglik_jit = njit(cache=True, nogil=True)(_corr_negloglik_loop)
else:  # pragma: no cover
    _garch11_filter_jit = None
    _garch11_negloglik_jit = None
    _corr_negloglik_jit = None

if USE_NUMBA:
    garch11_filter = _garch11_filter_jit
    garch11_negloglik = _garch11_negloglik_jit
    corr_negloglik = _corr_negloglik_jit
else:
    garch11_filter = _garch11_filter_numpy
    garch11_negloglik = _garch11_negloglik_numpy
    corr_negloglik = _corr_negloglik_numpy
