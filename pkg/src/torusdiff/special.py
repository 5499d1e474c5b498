"""Numerical primitives: wrapped normal sums, Bessel functions, BvM constant.

Most of the package works with the *unit-period* Gaussian sum

    S(h; v) = sum_k phi_v(h + k),

which is the wrapped normal density on a circle of length one.  The usual
2*pi-period wrapped normal is a rescaling of it.  Two evaluation routes are
kept: the direct wrapping sum (fast when ``v`` is small) and the Fourier
series (fast when ``v`` is large).
"""

import math
from itertools import product

import numpy as np
from scipy.special import gammaln, ive, logsumexp

from .exceptions import ConvergenceError, DomainError

TWO_PI = 2.0 * np.pi
LOG_2PI = math.log(TWO_PI)

_FOURIER_TAIL = 1e-16
_FOURIER_FLOOR = 1e-6
_BVM_REL_TOL = 1e-14
_BVM_MAX_TERMS = 500


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise DomainError("non-finite input")


def _direct_radius(var):
    # integer offsets needed on each side once h is reduced to [-1/2, 1/2)
    return int(math.ceil(6.0 * math.sqrt(var))) + 1


def _fourier_terms(var):
    return max(1, int(math.ceil(math.sqrt(-math.log(_FOURIER_TAIL) / (2 * np.pi**2 * var)))))


def _choose_method(var, method):
    if method == "auto":
        return "direct" if var <= 1.0 else "fourier"
    if method not in ("direct", "fourier"):
        raise ValueError(f"unknown method {method!r}")
    return method


def _reduce_unit(h):
    return h - np.floor(h + 0.5)


def _lse_last(e):
    # log-sum-exp over the last axis; rows always contain a finite maximum here
    top = e.max(axis=-1)
    return top + np.log(np.exp(e - top[..., None]).sum(axis=-1))


def log_periodic_gaussian_sum(h, var, method="auto"):
    """Return ``log sum_k phi_var(h + k)`` elementwise (unit period)."""
    h = np.asarray(h, dtype=float)
    _check_finite(h, var)
    if var <= 0:
        raise DomainError("variance must be positive")
    h = _reduce_unit(h)
    method = _choose_method(var, method)
    if method == "direct":
        K = _direct_radius(var)
        ks = np.arange(-K, K + 1, dtype=float)
        z = h[..., None] + ks
        return _lse_last(-0.5 * z * z / var) - 0.5 * math.log(TWO_PI * var)
    m = np.arange(1, _fourier_terms(var) + 1, dtype=float)
    coef = np.exp(-2.0 * np.pi**2 * m * m * var)
    s = 1.0 + 2.0 * np.cos(TWO_PI * h[..., None] * m) @ coef
    # cancellation leaves only absolute accuracy; tiny values go to the direct sum
    weak = s < _FOURIER_FLOOR
    if np.any(weak):
        if s.ndim == 0:
            return log_periodic_gaussian_sum(h, var, "direct")
        s = np.where(weak, 1.0, s)
        out = np.log(s)
        out[weak] = log_periodic_gaussian_sum(h[weak], var, "direct")
        return out
    return np.log(s)


def periodic_gaussian_sum(h, var, method="auto"):
    return np.exp(log_periodic_gaussian_sum(h, var, method))


def winding_moments(h, var, method="auto"):
    """Log-sum and the first two weighted moments of the winding terms.

    For ``h_k = h + k`` and weights ``phi_var(h_k)`` this returns

        (log sum_k phi(h_k),  sum h_k phi / sum phi,  sum h_k^2 phi / sum phi)

    All three are invariant under integer shifts of ``h``.
    """
    h = np.asarray(h, dtype=float)
    _check_finite(h, var)
    if var <= 0:
        raise DomainError("variance must be positive")
    h = _reduce_unit(h)
    method = _choose_method(var, method)
    if method == "direct":
        K = _direct_radius(var)
        ks = np.arange(-K, K + 1, dtype=float)
        z = h[..., None] + ks
        e = -0.5 * z * z / var
        lse = _lse_last(e)
        w = np.exp(e - lse[..., None])
        m1 = np.sum(w * z, axis=-1)
        m2 = np.sum(w * z * z, axis=-1)
        return lse - 0.5 * math.log(TWO_PI * var), m1, m2
    m = np.arange(1, _fourier_terms(var) + 1, dtype=float)
    coef = np.exp(-2.0 * np.pi**2 * m * m * var)
    arg = TWO_PI * h[..., None] * m
    c, s = np.cos(arg), np.sin(arg)
    S = 1.0 + 2.0 * c @ coef
    dS = -2.0 * s @ (TWO_PI * m * coef)
    d2S = -2.0 * c @ ((TWO_PI * m) ** 2 * coef)
    # sum (h+k) phi = -v S',  sum (h+k)^2 phi = v^2 S'' + v S
    return np.log(S), -var * dS / S, var * var * d2S / S + var


def wrapped_normal_logpdf(theta, mean, variance, method="auto"):
    """Log density of the wrapped normal WN(mean, variance) on [0, 2*pi)."""
    theta = np.asarray(theta, dtype=float)
    mean = np.asarray(mean, dtype=float)
    _check_finite(theta, mean, variance)
    if variance <= 0:
        raise DomainError("variance must be positive")
    h = (theta - mean) / TWO_PI
    return log_periodic_gaussian_sum(h, variance / TWO_PI**2, method) - LOG_2PI


def wrapped_normal_pdf(theta, mean, variance, method="auto"):
    """Density of the wrapped normal WN(mean, variance) on [0, 2*pi).

    Uses the wrapping sum for ``variance <= (2*pi)**2`` and the Fourier
    series otherwise; ``method`` forces one of ``"direct"``/``"fourier"``.
    """
    return np.exp(wrapped_normal_logpdf(theta, mean, variance, method))


def log_periodic_gaussian_sum_mv(h, cov, method="auto"):
    """Multivariate unit-period Gaussian sum ``log sum_k phi_cov(h + k)``.

    ``h`` has shape (..., p) and ``cov`` is a p x p covariance matrix.
    """
    h = np.asarray(h, dtype=float)
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    p = cov.shape[0]
    if h.shape[-1] != p:
        raise DomainError("dimension mismatch between h and cov")
    _check_finite(h, cov)
    if p == 1:
        return log_periodic_gaussian_sum(h[..., 0], cov[0, 0], method)
    eig = np.linalg.eigvalsh(cov)
    if eig[0] <= 0:
        raise DomainError("covariance must be positive definite")
    h = _reduce_unit(h)
    if method == "auto":
        method = "direct" if eig[0] <= 1.0 else "fourier"
    if method == "direct":
        radii = [_direct_radius(cov[j, j]) for j in range(p)]
        ks = np.array(list(product(*[range(-r, r + 1) for r in radii])), dtype=float)
        L = np.linalg.cholesky(cov)
        z = h[..., None, :] + ks
        sol = np.linalg.solve(L, np.moveaxis(z, -1, 0).reshape(p, -1))
        quad = np.sum(sol * sol, axis=0).reshape(z.shape[:-1])
        logdet = 2.0 * np.sum(np.log(np.diag(L)))
        return logsumexp(-0.5 * quad, axis=-1) - 0.5 * (p * LOG_2PI + logdet)
    r = int(math.ceil(math.sqrt(-math.log(_FOURIER_TAIL) / (2 * np.pi**2 * eig[0]))))
    ms = np.array(list(product(*[range(-r, r + 1)] * p)), dtype=float)
    coef = np.exp(-2.0 * np.pi**2 * np.einsum("ij,jk,ik->i", ms, cov, ms))
    s = np.cos(TWO_PI * h @ ms.T) @ coef
    return np.log(s)


def wrapped_normal_logpdf_mv(theta, mean, cov, method="auto"):
    """Log density of the multivariate wrapped normal on the torus [0, 2*pi)^p."""
    theta = np.asarray(theta, dtype=float)
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    p = cov.shape[0]
    h = (theta - np.asarray(mean, dtype=float)) / TWO_PI
    return log_periodic_gaussian_sum_mv(h, cov / TWO_PI**2, method) - p * LOG_2PI


def gaussian_pdf(x, var):
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x / var) / np.sqrt(TWO_PI * var)


def bessel_i(order, x):
    """Modified Bessel function of the first kind, ``I_order(x)`` for x >= 0."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("bessel_i requires x >= 0")
    _check_finite(x)
    return ive(order, x) * np.exp(x)


def log_bessel_i(order, x):
    """``log I_order(x)``, stable for large x."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("log_bessel_i requires x >= 0")
    with np.errstate(divide="ignore"):
        return np.log(ive(order, x)) + x


def bessel_ratio(order, x):
    """``I_order(x) / I_0(x)``."""
    x = np.asarray(x, dtype=float)
    return ive(order, x) / ive(0, x)


def _log_scaled_bessel(m, kappa):
    # log(I_m(kappa) / kappa^m), with the kappa -> 0 limit 1 / (2^m m!)
    v = ive(m, kappa) if kappa > 0 else 0.0
    if v <= 0.0 or kappa < 1e-8:
        return -m * math.log(2.0) - gammaln(m + 1) + math.log1p(kappa * kappa / (4.0 * (m + 1)))
    return math.log(v) + kappa - m * math.log(kappa)


def log_bvm_normalizing_constant(kappa1, kappa2, lam):
    """``log C(kappa1, kappa2, lambda)`` of the bivariate sine von Mises density."""
    _check_finite(kappa1, kappa2, lam)
    if kappa1 < 0 or kappa2 < 0:
        raise DomainError("concentrations must be non-negative")
    log_lam = math.log(lam * lam / 4.0) if lam != 0 else -np.inf
    logs = []
    running = -np.inf
    previous = np.inf
    growing = 0
    for m in range(_BVM_MAX_TERMS):
        t = (
            math.lgamma(2 * m + 1) - 2 * math.lgamma(m + 1)
            + (m * log_lam if m > 0 else 0.0)
            + _log_scaled_bessel(m, kappa1) + _log_scaled_bessel(m, kappa2)
        )
        logs.append(t)
        running = np.logaddexp(running, t)
        if t == -np.inf or (t < running + math.log(_BVM_REL_TOL) and t < previous):
            break
        growing = growing + 1 if t >= previous else 0
        previous = t
    else:
        raise ConvergenceError(
            "bivariate von Mises series did not converge",
            {"terms": _BVM_MAX_TERMS, "last_log_term": logs[-1], "log_sum": running,
             "increasing_run": growing},
        )
    return -(math.log(4 * np.pi**2) + running)


def bvm_normalizing_constant(kappa1, kappa2, lam):
    """``C(kappa1, kappa2, lambda)``; the density is ``C * exp(...)``."""
    return math.exp(log_bvm_normalizing_constant(kappa1, kappa2, lam))


def cauchy_pdf(x, location=0.0, scale=1.0):
    """Cauchy density with the given location and scale."""
    x = np.asarray(x, dtype=float)
    if not scale > 0:
        raise DomainError("scale must be positive")
    return scale / np.pi / ((x - location) ** 2 + scale * scale)
