"""Circular jump process driven by a symmetric Cauchy process.

``Theta_t = F^{-1}(V_t + F(theta_0)) mod 2 pi`` with ``V`` a Cauchy process
of scale ``sigma``.  Its transition density is a wrapped Cauchy composed
with ``F``; bridges are sampled exactly through the representation of the
Cauchy process as a Brownian motion run on a Levy subordinator clock.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._seeding import as_generator
from .circular import CircularCdf, CircularDensity
from .diffusion import PathSample
from .exceptions import ConvergenceError, DomainError
from .special import TWO_PI

MAX_PROPOSALS = 10**6
_TABLE_REL_TOL = 1e-12
_MIN_RADIUS = 10
_MAX_RADIUS = 20000
_BATCH = 4096


class JumpModel:
    """Stationary circular density plus Cauchy scale ``sigma``."""

    def __init__(self, density, sigma):
        if not isinstance(density, CircularDensity):
            raise DomainError("the jump process is defined for circular densities")
        if np.ndim(sigma) != 0 or not float(sigma) > 0:
            raise DomainError("sigma must be a positive scalar")
        self.density = density
        self.sigma = float(sigma)
        self._cdf = CircularCdf(density)

    def rho(self, t):
        """``rho_t(sigma) = exp(-2 pi t sigma)``."""
        return np.exp(-TWO_PI * np.asarray(t, dtype=float) * self.sigma)

    def __repr__(self):
        return f"JumpModel({self.density!r}, sigma={self.sigma})"


def _wrapped_cauchy_factor(h, rho):
    # (1 - rho^2) / (1 + rho^2 - 2 rho cos(2 pi h))
    return (1.0 - rho * rho) / (1.0 + rho * rho - 2.0 * rho * np.cos(TWO_PI * h))


def jump_transition_density(model, theta_from, theta_to, t, log=False):
    """Closed-form transition density of the jump process."""
    if not t > 0:
        raise DomainError("elapsed time must be positive")
    theta_from = np.asarray(theta_from, dtype=float)
    theta_to = np.asarray(theta_to, dtype=float)
    if not (np.all(np.isfinite(theta_from)) and np.all(np.isfinite(theta_to))):
        raise DomainError("non-finite angle")
    dens = model.density
    h = dens.cdf(theta_to) - dens.cdf(theta_from)
    rho = float(model.rho(t))
    out = np.log(_wrapped_cauchy_factor(h, rho)) + dens.logpdf(theta_to)
    return out if log else np.exp(out)


def cauchy_increments(model, n, delta, rng, size=None, mode="direct"):
    """Transform-space increments, shape ``(size, n)`` (or ``(n,)``).

    ``direct`` draws ``C(0, (delta sigma)^2)`` variates; ``subordinated``
    draws ``X ~ N(0, 1 / beta)`` with ``beta = delta^2 / 2`` and returns
    ``sqrt(2 sigma^2 X^{-2}) * N(0, 1)``.
    """
    shape = (n,) if size is None else (size, n)
    if mode == "direct":
        return delta * model.sigma * rng.standard_cauchy(shape)
    if mode == "subordinated":
        beta = delta * delta / 2.0
        x = rng.standard_normal(shape) / math.sqrt(beta)
        s = 1.0 / (x * x)
        return np.sqrt(2.0 * model.sigma**2 * s) * rng.standard_normal(shape)
    raise DomainError(f"unknown mode {mode!r}; use 'direct' or 'subordinated'")


def simulate_jump_paths(model, theta0, n, delta, random_state=None, size=1, mode="direct"):
    """Exact simulation of ``size`` jump paths; returns angles of shape (size, n + 1)."""
    if n < 0 or int(n) != n:
        raise DomainError("n must be a non-negative integer")
    if not delta > 0:
        raise DomainError("delta must be positive")
    rng = as_generator(random_state)
    theta0 = np.mod(np.broadcast_to(np.asarray(theta0, dtype=float), (size,)), TWO_PI)
    out = np.empty((size, n + 1))
    out[:, 0] = theta0
    if n == 0:
        return out
    v = np.cumsum(cauchy_increments(model, n, delta, rng, size, mode), axis=1)
    out[:, 1:] = np.mod(model._cdf.inverse_cdf(v + model.density.cdf(theta0)[:, None]), TWO_PI)
    return out


def simulate_jump_path(model, theta0, n, delta, random_state=None, mode="direct"):
    """One exact jump path as a :class:`PathSample`."""
    return PathSample(delta, simulate_jump_paths(model, theta0, n, delta, random_state, 1, mode)[0])


@dataclass
class JumpWindingTable:
    """Winding law of a jump bridge: an exact table plus two exact tails.

    ``probs`` covers ``ks`` (descending order); ``tail_lower`` and
    ``tail_upper`` are the masses of ``k < ks.min()`` and ``k > ks.max()``.
    """

    d: float
    scale: float
    ks: np.ndarray
    probs: np.ndarray
    tail_lower: float
    tail_upper: float

    @property
    def total(self):
        return float(self.probs.sum() + self.tail_lower + self.tail_upper)

    def _tail_draw(self, rng, start):
        # k >= start with P ~ 1 / ((d + k)^2 + s^2), d + start - 1 >= 0; rejection from the
        # continuous Cauchy tail rounded up, which dominates the integer law termwise
        s, d = self.scale, self.d
        a0 = math.atan((d + start - 1) / s)
        while True:
            x = s * math.tan(a0 + rng.random() * (math.pi / 2 - a0))
            k = max(start, math.ceil(x - d))
            j = d + k
            cell = (math.atan(j / s) - math.atan((j - 1) / s)) / s
            if rng.random() * cell <= 1.0 / (j * j + s * s):
                return k

    def sample(self, rng):
        u = rng.random() * self.total
        if u < self.tail_lower:
            mirror = JumpWindingTable(-self.d, self.scale, self.ks, self.probs, 0.0, 0.0)
            return -mirror._tail_draw(rng, -int(self.ks.min()) + 1)
        u -= self.tail_lower
        if u < self.tail_upper:
            return self._tail_draw(rng, int(self.ks.max()) + 1)
        u -= self.tail_upper
        cum = np.cumsum(self.probs)
        return int(self.ks[min(np.searchsorted(cum, u, side="right"), len(cum) - 1)])


def _tail_sum(a, s):
    # sum_{m >= 0} 1 / ((a + m)^2 + s^2) for a >= 10 by Euler-Maclaurin
    g = 1.0 / (a * a + s * s)
    integral = (math.pi / 2 - math.atan(a / s)) / s
    g1 = -2.0 * a * g * g
    g3 = -24.0 * a * (a * a - s * s) * g**4
    return integral + g / 2 - g1 / 12 + g3 / 720


def jump_winding_distribution(model, theta_start, theta_end, horizon):
    """Winding law ``P[K = k]`` of the jump bridge.

    Proportional to the Cauchy density ``f_C(d + k; 0, (T sigma)^2)`` with
    ``d = F(theta_T) - F(theta_0)``; the wrapped-Cauchy normalizer is known
    in closed form, so table and tails are exact probabilities.
    """
    if not horizon > 0:
        raise DomainError("horizon must be positive")
    dens = model.density
    d = float(dens.cdf(theta_end) - dens.cdf(theta_start))
    s = horizon * model.sigma
    rho = math.exp(-TWO_PI * s)
    norm = s * (1.0 + rho * rho - 2.0 * rho * math.cos(TWO_PI * d)) / (math.pi * (1.0 - rho * rho))
    center = -round(d)
    # grow the radius until last term / total < tol; mass beyond the cap goes to the exact tails
    r = _MIN_RADIUS
    while r < _MAX_RADIUS and norm / ((abs(d) + r) ** 2 + s * s) >= _TABLE_REL_TOL:
        r *= 2
    r = min(r, _MAX_RADIUS)
    ks = np.arange(center - r, center + r + 1)
    probs = norm / ((d + ks) ** 2 + s * s)
    upper = norm * _tail_sum(d + ks[-1] + 1, s)
    lower = norm * _tail_sum(-(d + ks[0] - 1), s)
    order = np.argsort(-probs, kind="stable")
    return JumpWindingTable(d, s, ks[order], probs[order], lower, upper)


def bridge_bound(y, horizon, sigma):
    """``M_A = pi (y^2 + (T sigma)^2) / (T sigma sqrt(2 pi e) |y|)``."""
    s = horizon * sigma
    y = np.abs(np.asarray(y, dtype=float))
    with np.errstate(divide="ignore"):
        return np.pi * (y * y + s * s) / (s * np.sqrt(TWO_PI * np.e) * y)


def _log_ratio(y, S, sigma, s):
    # log [phi_{2 sigma^2 S}(y) / f_C(y; 0, s^2)]
    var = 2.0 * sigma * sigma * S
    log_phi = -0.5 * y * y / var - 0.5 * np.log(TWO_PI * var)
    log_fc = math.log(s / math.pi) - math.log(y * y + s * s)
    return log_phi - log_fc


def auxiliary_acceptance_rate(y, horizon, sigma, intervals, method):
    """Theoretical acceptance probability of the step-2 sampler."""
    s = horizon * sigma
    if method == "normal":
        return 0.0 if y == 0 else float(1.0 / bridge_bound(y, horizon, sigma))
    return float(np.max(intervals) / horizon * s * s / (y * y + s * s))


def sample_auxiliary(y, horizon, sigma, intervals, rng, method="auto", max_proposals=MAX_PROPOSALS):
    """Draw ``(A_1, ..., A_{n+1})`` from its conditional law given ``V_T = y``.

    ``normal`` is acceptance-rejection from the independent normal factor
    with bound ``M_A``.  ``rayleigh`` draws the coordinate with the longest
    interval from the size-biased density ``|a| phi(a)`` instead, which
    yields the bound-free acceptance probability
    ``exp(-y^2 / (4 sigma^2 S)) / (sqrt(S) |a|)`` and stays efficient as
    ``y -> 0`` where ``M_A`` blows up.  ``auto`` picks the method with the
    larger acceptance rate.  Returns ``(A, proposals_used)``.
    """
    intervals = np.asarray(intervals, dtype=float)
    s = horizon * sigma
    if method == "auto":
        rates = {m: auxiliary_acceptance_rate(y, horizon, sigma, intervals, m) for m in ("normal", "rayleigh")}
        method = max(rates, key=rates.get)
    if method == "normal" and y == 0:
        raise DomainError("the normal proposal has an infinite bound at y = 0; use 'rayleigh'")
    sd = np.sqrt(2.0) / intervals
    used = 0
    if method == "normal":
        log_m = math.log(bridge_bound(y, horizon, sigma))
    elif method == "rayleigh":
        lead = int(np.argmax(intervals))
    else:
        raise DomainError(f"unknown method {method!r}")
    while used < max_proposals:
        batch = min(_BATCH, max_proposals - used)
        a = rng.standard_normal((batch, intervals.size)) * sd
        if method == "rayleigh":
            a[:, lead] = rng.rayleigh(sd[lead], batch)
        S = np.sum(a**-2.0, axis=1)
        if method == "normal":
            log_acc = _log_ratio(y, S, sigma, s) - log_m
        else:
            log_acc = -y * y / (4.0 * sigma * sigma * S) - 0.5 * np.log(S) - np.log(np.abs(a[:, lead]))
        hit = np.flatnonzero(np.log(rng.random(batch)) <= log_acc)
        if hit.size:
            used += int(hit[0]) + 1
            return a[hit[0]], used
        used += batch
    raise ConvergenceError(
        "jump bridge acceptance-rejection exceeded the proposal budget",
        {"proposals": used, "y": y, "method": method,
         "acceptance_rate": auxiliary_acceptance_rate(y, horizon, sigma, intervals, method)},
    )


@dataclass
class CauchyBridgeDraw:
    """One exact jump-bridge draw.

    ``clock`` holds the subordinator times ``S_{t_1} < ... < S_{t_{n+1}}``
    built from ``auxiliary`` = (A_1..A_{n+1}).
    """

    times: np.ndarray
    winding: int
    endpoint: float
    auxiliary: np.ndarray
    clock: np.ndarray
    transform: np.ndarray
    states: np.ndarray
    bound: float
    proposals: int


def sample_jump_bridge(model, theta_start, theta_end, horizon, times, random_state=None, method="auto"):
    """Exact bridge of the jump process at interior ``times``."""
    rng = as_generator(random_state)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times <= 0) or np.any(times >= horizon) or np.any(np.diff(times) <= 0):
        raise DomainError("interior times must be strictly increasing inside (0, T)")
    table = jump_winding_distribution(model, theta_start, theta_end, horizon)
    k = table.sample(rng)
    y = table.d + k
    intervals = np.diff(np.concatenate([[0.0], times, [horizon]]))
    a, used = sample_auxiliary(y, horizon, model.sigma, intervals, rng, method)
    clock = np.cumsum(a**-2.0)
    z = rng.standard_normal(intervals.size) * np.sqrt(2.0 * model.sigma**2) / np.abs(a)
    w = np.cumsum(z)
    u = w[:-1] - clock[:-1] / clock[-1] * (w[-1] - y)
    base = float(model.density.cdf(np.mod(theta_start, TWO_PI)))
    states = np.mod(model._cdf.inverse_cdf(u + base), TWO_PI)
    return CauchyBridgeDraw(times, int(k), float(y), a, clock, u, states,
                            float(bridge_bound(y, horizon, model.sigma)), used)
