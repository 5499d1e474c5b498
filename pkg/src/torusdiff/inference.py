"""Exact likelihood inference for circular diffusions and jump processes.

The conditional log-likelihood of a discretely observed path is a sum of
closed-form log transition densities.  For the diffusion kernel, with
``h = F(theta_i) - F(theta_{i-1})`` and ``v = sigma^2 Delta``,

    log p = log sum_k phi_v(h + k) + log f(theta_i),

and the score only needs the first two moments of ``h + k`` under the
weights ``phi_v(h + k)``.  Parameters are optimized in an unconstrained
representation (log for positive coordinates, logit for coordinates in
(0, 1), identity otherwise).
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats
from scipy.special import expit, ive, logit

from ._seeding import as_generator
from .circular import CircularDensity, Uniform, VonMises, VonMisesMixture, WrappedCauchy
from .diffusion import PathSample
from .exceptions import ConvergenceError, DomainError
from .special import TWO_PI, winding_moments

KERNELS = ("diffusion", "jump")
GTOL = 1e-8
MAX_ITER = 500
BFGS_RESTARTS = 5
FISHER_EIG_WARN = 1e-8
FISHER_COND_WARN = 1e10


# ---------------------------------------------------------------------------
# parameter families


class Family:
    """A parametric circular density family plus the volatility ``sigma``.

    ``beta_kinds`` classifies every density coordinate as ``angle``,
    ``real``, ``positive`` or ``unit`` (inside (0, 1)); it decides the
    unconstrained representation used by the optimizer.
    """

    name = "abstract"
    beta_names = ()
    beta_kinds = ()
    density_class = None
    default_starts = 1

    @property
    def names(self):
        return tuple(self.beta_names) + ("sigma",)

    @property
    def kinds(self):
        return tuple(self.beta_kinds) + ("positive",)

    @property
    def q(self):
        return len(self.names)

    def density(self, beta):
        return self.density_class.from_params(beta)

    def stationary_mle(self, angles, rng=None):
        raise NotImplementedError

    def index(self, name):
        try:
            return self.names.index(name)
        except ValueError:
            raise DomainError(f"{self.name} has no parameter {name!r}; expected one of {self.names}") from None

    def validate(self, xi):
        xi = np.asarray(xi, dtype=float)
        if xi.shape != (self.q,):
            raise DomainError(f"{self.name} expects {self.q} parameters {self.names}")
        if not np.all(np.isfinite(xi)):
            raise DomainError("non-finite parameter")
        for x, kind, name in zip(xi, self.kinds, self.names):
            if kind == "positive" and not x > 0:
                raise DomainError(f"{name} must be positive")
            if kind == "unit" and not 0 < x < 1:
                raise DomainError(f"{name} must lie in (0, 1)")
        return xi

    def __eq__(self, other):
        return isinstance(other, Family) and self.names == other.names and self.name == other.name

    def __hash__(self):
        return hash((self.name, self.names))

    def __repr__(self):
        return f"{type(self).__name__}()"


def _circular_mean(angles):
    c, s = np.mean(np.cos(angles)), np.mean(np.sin(angles))
    return math.atan2(s, c) % TWO_PI, math.hypot(c, s)


def a1_inverse(r):
    """Solve ``I_1(kappa) / I_0(kappa) = r`` for kappa."""
    if r <= 0:
        return 0.0
    if r >= 1 - 1e-12:
        return 1e6
    f = lambda k: ive(1, k) / ive(0, k) - r
    hi = 1.0
    while f(hi) < 0:
        hi *= 2.0
    return optimize.brentq(f, 0.0, hi, xtol=1e-14)


class UniformFamily(Family):
    name = "uniform"
    density_class = Uniform

    def density(self, beta):
        return Uniform()

    def stationary_mle(self, angles, rng=None):
        return np.empty(0)


class VonMisesFamily(Family):
    name = "von_mises"
    beta_names = ("mu", "kappa")
    beta_kinds = ("angle", "positive")
    density_class = VonMises

    def stationary_mle(self, angles, rng=None):
        mu, r = _circular_mean(angles)
        return np.array([mu, max(a1_inverse(r), 1e-2)])


class WrappedCauchyFamily(Family):
    name = "wrapped_cauchy"
    beta_names = ("mu", "rho")
    beta_kinds = ("angle", "unit")
    density_class = WrappedCauchy

    def stationary_mle(self, angles, rng=None):
        mu, r = _circular_mean(angles)
        rho0 = min(max(r, 1e-2), 0.95)
        # profile the stationary WC likelihood in (mu, rho) from the moment start
        def nll(p):
            return -np.sum(WrappedCauchy(p[0], expit(p[1])).logpdf(angles))
        res = optimize.minimize(nll, [mu, logit(rho0)], method="Nelder-Mead",
                                options={"xatol": 1e-6, "fatol": 1e-9})
        return np.array([res.x[0] % TWO_PI, min(max(expit(res.x[1]), 1e-3), 0.99)])


class VonMisesMixtureFamily(Family):
    """m-component von Mises mixture, ``beta = (z_1..z_{m-1}, mu_1..mu_m, kappa_1..kappa_m)``."""

    name = "von_mises_mixture"
    density_class = VonMisesMixture
    default_starts = 5

    def __init__(self, n_components=2):
        if n_components < 2:
            raise DomainError("a mixture needs at least two components")
        self.m = int(n_components)
        self.beta_names = VonMisesMixture(np.full(self.m, 1 / self.m), np.zeros(self.m), np.ones(self.m)).param_names
        self.beta_kinds = ("real",) * (self.m - 1) + ("angle",) * self.m + ("positive",) * self.m

    def stationary_mle(self, angles, rng=None):
        rng = as_generator(rng)
        return vm_mixture_em(angles, self.m, rng).params

    def __repr__(self):
        return f"VonMisesMixtureFamily(n_components={self.m})"


def vm_mixture_em(angles, m, rng=None, iters=200, tol=1e-10):
    """EM fit of an m-component von Mises mixture to i.i.d. angles."""
    rng = as_generator(rng)
    angles = np.asarray(angles, dtype=float)
    mus = np.sort(rng.choice(angles, m, replace=False)) if angles.size >= m else np.linspace(0, TWO_PI, m, endpoint=False)
    kappas = np.full(m, 2.0)
    w = np.full(m, 1.0 / m)
    prev = -np.inf
    for _ in range(iters):
        comp = np.stack([VonMises(mu, k).pdf(angles) for mu, k in zip(mus, kappas)], axis=1) * w
        tot = comp.sum(axis=1)
        ll = np.sum(np.log(tot))
        r = comp / tot[:, None]
        nk = r.sum(axis=0) + 1e-12
        w = nk / nk.sum()
        c, s = r.T @ np.cos(angles), r.T @ np.sin(angles)
        mus = np.arctan2(s, c) % TWO_PI
        kappas = np.array([min(max(a1_inverse(min(np.hypot(ci, si) / n, 0.999999)), 1e-2), 500.0)
                           for ci, si, n in zip(c, s, nk)])
        if ll - prev < tol * abs(ll):
            break
        prev = ll
    w = np.maximum(w, 1e-6)
    return VonMisesMixture(w / w.sum(), mus, kappas).canonical()


_FAMILIES = {
    "uniform": UniformFamily,
    "von_mises": VonMisesFamily,
    "vm": VonMisesFamily,
    "wrapped_cauchy": WrappedCauchyFamily,
    "wc": WrappedCauchyFamily,
    "von_mises_mixture": VonMisesMixtureFamily,
    "vm_mixture": VonMisesMixtureFamily,
}


def get_family(spec, n_components=2):
    """Resolve a family from a :class:`Family`, a name or a density instance."""
    if isinstance(spec, Family):
        return spec
    if isinstance(spec, CircularDensity):
        if isinstance(spec, VonMisesMixture):
            return VonMisesMixtureFamily(spec.m)
        return get_family(spec.family)
    try:
        cls = _FAMILIES[str(spec).lower()]
    except KeyError:
        raise DomainError(f"unknown family {spec!r}; choose from {sorted(set(_FAMILIES))}") from None
    return cls(n_components) if cls is VonMisesMixtureFamily else cls()


# ---------------------------------------------------------------------------
# unconstrained representation


# exp() of larger log-scale coordinates overflows
_Z_MAX = 700.0
# log-scale coordinates above this (values > 1e13) are treated as infeasible by the objectives
Z_FEASIBLE = 30.0


def to_unconstrained(xi, kinds):
    xi = np.asarray(xi, dtype=float)
    z = xi.copy()
    for i, kind in enumerate(kinds):
        if kind == "positive":
            z[i] = math.log(xi[i])
        elif kind == "unit":
            z[i] = logit(xi[i])
    return z


def infeasible(z, kinds):
    return any(kind == "positive" and zi > Z_FEASIBLE for zi, kind in zip(z, kinds))


def from_unconstrained(z, kinds):
    z = np.asarray(z, dtype=float)
    xi = z.copy()
    for i, kind in enumerate(kinds):
        if kind == "positive":
            xi[i] = math.exp(min(z[i], _Z_MAX))
        elif kind == "unit":
            xi[i] = expit(z[i])
    return xi


def unconstrained_jacobian(xi, kinds):
    """Diagonal of ``d xi / d z``."""
    xi = np.asarray(xi, dtype=float)
    d = np.ones_like(xi)
    for i, kind in enumerate(kinds):
        if kind == "positive":
            d[i] = xi[i]
        elif kind == "unit":
            d[i] = xi[i] * (1.0 - xi[i])
    return d


@dataclass(frozen=True)
class ParamVector:
    """Natural parameter vector ``xi = (beta, sigma)`` of a family."""

    family: Family
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.family.validate(self.values), dtype=float)
        for i, kind in enumerate(self.family.kinds):
            if kind == "angle":
                v[i] = np.mod(v[i], TWO_PI)
        object.__setattr__(self, "values", v)

    @property
    def beta(self):
        return self.values[:-1]

    @property
    def sigma(self):
        return float(self.values[-1])

    def density(self):
        return self.family.density(self.beta)

    def to_unconstrained(self):
        return to_unconstrained(self.values, self.family.kinds)

    @classmethod
    def from_unconstrained(cls, family, z):
        return cls(family, from_unconstrained(z, family.kinds))

    def as_dict(self):
        return {n: float(v) for n, v in zip(self.family.names, self.values)}


# ---------------------------------------------------------------------------
# data


class Transitions:
    """Pairs ``(theta_{i-1}, theta_i)`` grouped in blocks of equal spacing."""

    def __init__(self, blocks, pooled):
        self.blocks = [(float(d), np.asarray(a, float), np.asarray(b, float)) for d, a, b in blocks if len(a)]
        self.pooled = np.asarray(pooled, dtype=float)

    @property
    def n(self):
        return sum(a.size for _, a, _ in self.blocks)

    @classmethod
    def from_data(cls, data, delta=None):
        if isinstance(data, Transitions):
            return data
        paths = as_paths(data, delta)
        by_delta = {}
        for p in paths:
            if p.dim != 1:
                raise DomainError("likelihood inference is implemented for circular paths")
            a, b = by_delta.setdefault(p.delta, ([], []))
            a.append(p.theta[:-1])
            b.append(p.theta[1:])
        blocks = [(d, np.concatenate(a), np.concatenate(b)) for d, (a, b) in by_delta.items()]
        pooled = np.concatenate([p.theta for p in paths])
        out = cls(blocks, pooled)
        if out.n < 1:
            raise DomainError("need at least one transition")
        return out


def as_paths(data, delta=None):
    """Normalize input to a list of circular :class:`PathSample` objects.

    Accepts a PathSample, a sequence of them, a 1-d angle array (one path)
    or a 2-d array with one path per row; arrays need ``delta``.
    """
    if isinstance(data, PathSample):
        return [data]
    if isinstance(data, (list, tuple)) and data and all(isinstance(p, PathSample) for p in data):
        return list(data)
    arr = np.asarray(data, dtype=float)
    if delta is None:
        raise DomainError("delta is required when passing raw angle arrays")
    if arr.ndim == 1:
        return [PathSample(delta, arr)]
    if arr.ndim == 2:
        return [PathSample(delta, row) for row in arr]
    raise DomainError("angles must be 1-d (one path) or 2-d (one path per row)")


# ---------------------------------------------------------------------------
# per-transition log-likelihood and score


def _diffusion_block(dens, nb, sigma, delta, a, b, want_score):
    F, dF = dens.cdf_and_grad(np.concatenate([a, b])) if nb and want_score else (dens.cdf(np.concatenate([a, b])), None)
    n = a.size
    h = F[n:] - F[:n]
    v = sigma * sigma * delta
    log_s, m1, m2 = winding_moments(h, v)
    ll = log_s + dens.logpdf(b)
    if not want_score:
        return ll, None
    score = np.empty((n, nb + 1))
    if nb:
        score[:, :nb] = dens.dlogpdf_dparams(b) - (dF[n:] - dF[:n]) * (m1 / v)[:, None]
    score[:, nb] = -1.0 / sigma + m2 / (sigma**3 * delta)
    return ll, score


def _jump_block(dens, nb, sigma, delta, a, b, want_score):
    F, dF = dens.cdf_and_grad(np.concatenate([a, b])) if nb and want_score else (dens.cdf(np.concatenate([a, b])), None)
    n = a.size
    h = F[n:] - F[:n]
    rho = math.exp(-TWO_PI * delta * sigma)
    c = np.cos(TWO_PI * h)
    D = 1.0 + rho * rho - 2.0 * rho * c
    ll = math.log1p(-rho * rho) - np.log(D) + dens.logpdf(b)
    if not want_score:
        return ll, None
    score = np.empty((n, nb + 1))
    if nb:
        dh = -4.0 * np.pi * rho * np.sin(TWO_PI * h) / D
        score[:, :nb] = dens.dlogpdf_dparams(b) + dh[:, None] * (dF[n:] - dF[:n])
    d_rho = -2.0 * rho / (1.0 - rho * rho) - (2.0 * rho - 2.0 * c) / D
    score[:, nb] = d_rho * (-TWO_PI * delta * rho)
    return ll, score


def transition_terms(family, xi, data, kernel="diffusion", score=True, delta=None):
    """Per-transition log-densities (n,) and natural-coordinate scores (n, q)."""
    family = get_family(family)
    xi = family.validate(xi)
    trans = Transitions.from_data(data, delta)
    if kernel not in KERNELS:
        raise DomainError(f"kernel must be one of {KERNELS}")
    block = _diffusion_block if kernel == "diffusion" else _jump_block
    dens = family.density(xi[:-1])
    nb = family.q - 1
    lls, scores = [], []
    for d, a, b in trans.blocks:
        ll, sc = block(dens, nb, xi[-1], d, a, b, score)
        lls.append(ll)
        scores.append(sc)
    ll = np.concatenate(lls)
    if not np.all(np.isfinite(ll)):
        raise DomainError("transition density evaluated to zero or non-finite")
    return ll, (np.concatenate(scores) if score else None)


def log_likelihood(family, xi, data, kernel="diffusion", delta=None):
    """Conditional log-likelihood (the initial state does not contribute)."""
    return float(np.sum(transition_terms(family, xi, data, kernel, score=False, delta=delta)[0]))


def score(family, xi, data, kernel="diffusion", delta=None):
    """Analytic gradient of :func:`log_likelihood` in natural coordinates."""
    return np.sum(transition_terms(family, xi, data, kernel, score=True, delta=delta)[1], axis=0)


def fisher_information(family, xi, data, kernel="diffusion", delta=None):
    """``I_hat = n^{-1} sum_i s_i s_i'`` from per-transition scores."""
    sc = transition_terms(family, xi, data, kernel, score=True, delta=delta)[1]
    return sc.T @ sc / sc.shape[0]


# ---------------------------------------------------------------------------
# maximum likelihood


@dataclass(frozen=True)
class FitResult:
    """Maximum likelihood fit.

    ``fisher`` is the per-transition information estimate over the free
    coordinates; ``standard_errors`` are ``sqrt(diag((n I)^{-1}))`` and NaN
    for coordinates held fixed.
    """

    estimate: ParamVector
    loglik: float
    fisher: np.ndarray
    standard_errors: np.ndarray
    n_transitions: int
    kernel: str
    free: tuple
    iterations: int
    grad_norm: float
    condition_number: float
    converged: bool
    fisher_warning: bool
    starts: int = 1
    messages: tuple = field(default_factory=tuple)

    @property
    def family(self):
        return self.estimate.family

    @property
    def xi(self):
        return self.estimate.values

    @property
    def params(self):
        return self.estimate.as_dict()

    def confidence_intervals(self, level=0.95):
        z = stats.norm.ppf(0.5 + level / 2)
        return np.column_stack([self.xi - z * self.standard_errors, self.xi + z * self.standard_errors])

    def to_dict(self):
        names = self.family.names
        return {
            "family": self.family.name,
            "kernel": self.kernel,
            "estimate": self.estimate.as_dict(),
            "standard_errors": {n: _json_float(s) for n, s in zip(names, self.standard_errors)},
            "loglik": self.loglik,
            "n_transitions": self.n_transitions,
            "free": [names[i] for i in self.free],
            "fisher": self.fisher.tolist(),
            "diagnostics": {
                "iterations": self.iterations,
                "grad_norm": self.grad_norm,
                "condition_number": _json_float(self.condition_number),
                "converged": self.converged,
                "fisher_warning": self.fisher_warning,
                "starts": self.starts,
                "messages": list(self.messages),
            },
        }


def _json_float(x):
    x = float(x)
    return x if math.isfinite(x) else None


def initial_estimate(family, data, kernel="diffusion", delta=None, rng=None):
    """Stationary MLE of beta on the pooled angles plus a moment start for sigma.

    The transform-space increments ``d = F(theta_i) - F(theta_{i-1})``
    satisfy ``E cos(2 pi d) = exp(-2 pi^2 sigma^2 Delta)`` (diffusion) or
    ``exp(-2 pi Delta sigma)`` (jump); ``sigma`` is matched to the
    empirical mean of ``cos(2 pi d)`` and averaged over spacing blocks.
    """
    family = get_family(family)
    trans = Transitions.from_data(data, delta)
    beta = family.stationary_mle(trans.pooled, rng)
    dens = family.density(beta)
    num = den = 0.0
    for d, a, b in trans.blocks:
        c = float(np.mean(np.cos(TWO_PI * (dens.cdf(b) - dens.cdf(a)))))
        c = min(max(c, 1e-2), 1 - 1e-10)
        s = math.sqrt(-math.log(c) / (2 * np.pi**2 * d)) if kernel == "diffusion" else -math.log(c) / (TWO_PI * d)
        num += a.size * s
        den += a.size
    return np.r_[beta, num / den]


def _objective(family, trans, kernel, xi_full, free, n):
    kinds = [family.kinds[i] for i in free]

    def fun(z):
        if infeasible(z, kinds):
            return np.inf, np.zeros_like(z)
        xi = xi_full.copy()
        xi[free] = from_unconstrained(z, kinds)
        try:
            ll, sc = transition_terms(family, xi, trans, kernel)
        except (ValueError, FloatingPointError, OverflowError):
            return np.inf, np.zeros_like(z)
        g = sc[:, free].sum(axis=0) * unconstrained_jacobian(xi[free], kinds)
        val = -ll.sum() / n
        if not np.isfinite(val) or not np.all(np.isfinite(g)):
            return np.inf, np.zeros_like(z)
        return val, -g / n

    return fun, kinds


def _newton_polish(fun, z, steps=6):
    # Newton steps with a finite-difference Hessian of the analytic gradient
    val, g = fun(z)
    for _ in range(steps):
        if np.max(np.abs(g)) < 1e-12:
            break
        k = z.size
        H = np.empty((k, k))
        for j in range(k):
            e = np.zeros(k)
            e[j] = 1e-5 * max(1.0, abs(z[j]))
            H[:, j] = (fun(z + e)[1] - fun(z - e)[1]) / (2 * e[j])
        H = 0.5 * (H + H.T)
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)):
            break
        t = 1.0
        while t > 1e-4:
            v2, g2 = fun(z - t * step)
            if v2 <= val + 1e-15 * abs(val) and np.max(np.abs(g2)) < np.max(np.abs(g)):
                z, val, g = z - t * step, v2, g2
                break
            t /= 2
        else:
            break
    return z, val, g


def _run(fun, z0, maxiter, n):
    # the objective is the mean negative log-likelihood; stop on the total score
    # a precision-loss exit usually means a stale Hessian approximation (flat
    # directions near kappa = 0); restart from the last iterate while it helps
    nit, prev = 0, np.inf
    for _ in range(BFGS_RESTARTS):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = optimize.minimize(fun, z0, jac=True, method="BFGS",
                                    options={"gtol": GTOL / n, "maxiter": maxiter})
        nit += res.nit
        if res.success or not np.isfinite(res.fun) or (np.isfinite(prev) and res.fun >= prev - 1e-14 * abs(prev)):
            break
        prev, z0 = res.fun, res.x
    res.nit = nit
    z, val, g = res.x, res.fun, res.jac
    if np.isfinite(val) and np.max(np.abs(g)) * n > GTOL:
        z, val, g = _newton_polish(fun, z)
    return z, val, g, res


def fit_mle(family, data, init=None, kernel="diffusion", fixed=None, n_starts=None,
            random_state=None, delta=None, maxiter=MAX_ITER):
    """Maximum likelihood fit of ``xi = (beta, sigma)``.

    Parameters
    ----------
    family : Family, str or CircularDensity
        Stationary density family.
    data : PathSample, list of PathSample, Transitions or angle array
        Observed path(s); arrays need ``delta``.
    init : array_like or ParamVector, optional
        Starting value in natural coordinates.  Defaults to
        :func:`initial_estimate`.
    kernel : {"diffusion", "jump"}
    fixed : dict, optional
        ``{name: value}`` of natural coordinates held fixed.
    n_starts : int, optional
        Number of starts (the first is ``init``, the rest are jittered in
        unconstrained space).  Defaults to the family's ``default_starts``.

    Returns
    -------
    FitResult

    Raises
    ------
    ConvergenceError
        When no start converges; ``diagnostics["best"]`` holds the best
        iterate found.
    """
    family = get_family(family)
    trans = Transitions.from_data(data, delta)
    n = trans.n
    rng = as_generator(random_state)
    fixed = dict(fixed or {})
    if isinstance(init, ParamVector):
        init = init.values
    xi0 = np.array(init, dtype=float) if init is not None else initial_estimate(family, trans, kernel, rng=rng)
    fixed_idx = []
    for name, value in fixed.items():
        i = family.index(name)
        xi0[i] = value
        fixed_idx.append(i)
    family.validate(xi0)
    free = np.array([i for i in range(family.q) if i not in fixed_idx], dtype=int)
    if n < free.size:
        raise DomainError("need at least as many transitions as free parameters")
    if free.size == 0:
        return _make_result(family, trans, kernel, xi0, free, 0, 0.0, True, 1, ())

    fun, kinds = _objective(family, trans, kernel, xi0, free, n)
    z0 = to_unconstrained(xi0[free], kinds)
    starts = n_starts if n_starts is not None else family.default_starts
    candidates = [z0] + [z0 + rng.normal(0.0, 0.5, z0.size) for _ in range(max(starts, 1) - 1)]
    best = None
    for z_start in candidates:
        z, val, g, res = _run(fun, z_start, maxiter, n)
        if best is None or val < best[1]:
            best = (z, val, g, res)
    z, val, g, res = best
    gnorm = float(np.max(np.abs(g))) * n if g.size else 0.0
    xi = xi0.copy()
    xi[free] = from_unconstrained(z, kinds)
    # accepts BFGS precision-loss exits that nevertheless ended at a stationary point
    converged = bool(np.isfinite(val) and gnorm < 1e-4 * max(1.0, math.sqrt(n)))
    if not converged:
        raise ConvergenceError(
            f"likelihood optimization did not converge: {res.message}",
            {"best": xi.tolist(), "loglik": float(-val * n), "grad_norm": gnorm,
             "iterations": int(res.nit), "names": list(family.names)},
        )
    if isinstance(family, VonMisesMixtureFamily):
        xi = _canonical_mixture(family, xi)
    return _make_result(family, trans, kernel, xi, free, int(res.nit), gnorm, converged, len(candidates),
                        (str(res.message),))


def _canonical_mixture(family, xi):
    dens = family.density(xi[:-1]).canonical()
    return np.r_[dens.params, xi[-1]]


def _make_result(family, trans, kernel, xi, free, nit, gnorm, converged, starts, messages):
    ll, sc = transition_terms(family, xi, trans, kernel)
    n = sc.shape[0]
    sub = sc[:, free]
    fisher = sub.T @ sub / n
    se = np.full(family.q, np.nan)
    cond = np.nan
    warn = False
    msgs = list(messages)
    if free.size:
        eig = np.linalg.eigvalsh(fisher)
        cond = float(eig[-1] / eig[0]) if eig[0] > 0 else np.inf
        warn = bool(eig[0] < FISHER_EIG_WARN or cond > FISHER_COND_WARN)
        if warn:
            msgs.append("information matrix is near-singular (check identifiability)")
            warnings.warn("Fisher information is near-singular", RuntimeWarning, stacklevel=3)
        try:
            cov = np.linalg.inv(n * fisher)
            se[free] = np.sqrt(np.maximum(np.diag(cov), 0.0))
        except np.linalg.LinAlgError:
            pass
    return FitResult(ParamVector(family, xi), float(ll.sum()), fisher, se, n, kernel, tuple(int(i) for i in free),
                     nit, gnorm, cond, converged, warn, starts, tuple(msgs))


# ---------------------------------------------------------------------------
# likelihood ratio tests


@dataclass(frozen=True)
class TestResult:
    """Likelihood ratio test ``-2 log Q`` with its chi-square p-value."""

    __test__ = False

    statistic: float
    df: int
    p_value: float
    restricted: object
    unrestricted: object
    boundary: bool = False
    hypothesis: dict = field(default_factory=dict)
    messages: tuple = field(default_factory=tuple)

    def reject(self, alpha=0.05):
        return self.p_value < alpha

    def to_dict(self):
        def fit(r):
            if isinstance(r, FitResult):
                return r.to_dict()
            if isinstance(r, (list, tuple)):
                return [fit(x) for x in r]
            return r.to_dict() if hasattr(r, "to_dict") else r
        return {
            "statistic": self.statistic,
            "df": self.df,
            "p_value": self.p_value,
            "boundary": self.boundary,
            "hypothesis": self.hypothesis,
            "messages": list(self.messages),
            "restricted": fit(self.restricted),
            "unrestricted": fit(self.unrestricted),
        }


def lr_statistic(ll_unrestricted, ll_restricted):
    """``-2 log Q`` clipped at zero (values above -1e-8 are rounding)."""
    stat = 2.0 * (ll_unrestricted - ll_restricted)
    return max(stat, 0.0)


_BOUNDARY = {("von_mises", "kappa"): 0.0, ("wrapped_cauchy", "rho"): 0.0}


def lr_test(family, data, null, kernel="diffusion", unrestricted=None, delta=None, random_state=None):
    """One-sample likelihood ratio test of ``H0: xi^(2) = xi_0^(2)``.

    ``null`` maps parameter names to their hypothesized values.  Setting a
    von Mises ``kappa`` (or wrapped Cauchy ``rho``) to zero is the
    uniformity boundary: the mean direction is then unidentified, so the
    null fixes both and is fitted as the uniform family with two degrees of
    freedom; the result carries ``boundary=True`` because the true
    parameter is not interior to the unrestricted space in the original
    coordinates.
    """
    family = get_family(family)
    trans = Transitions.from_data(data, delta)
    null = {k: float(v) for k, v in dict(null).items()}
    if not null:
        raise DomainError("the null hypothesis must fix at least one parameter")
    for name in null:
        family.index(name)
    if unrestricted is None:
        unrestricted = fit_mle(family, trans, kernel=kernel, random_state=random_state)
    boundary = any(null.get(name) == value for (fam, name), value in _BOUNDARY.items() if fam == family.name)
    messages = []
    if boundary:
        uni = UniformFamily()
        if "sigma" in null:
            restricted = fit_mle(uni, trans, init=[null["sigma"]], fixed={"sigma": null["sigma"]}, kernel=kernel)
        else:
            restricted = fit_mle(uni, trans, init=[unrestricted.estimate.sigma], kernel=kernel)
        df = 2 + int("sigma" in null)
        messages.append("boundary hypothesis: the true parameter does not belong to the interior of the "
                        "parameter space; the chi-square reference uses the locally regular "
                        "(kappa cos mu, kappa sin mu) coordinates")
    else:
        init = unrestricted.xi.copy()
        for k, v in null.items():
            init[family.index(k)] = v
        restricted = fit_mle(family, trans, init=init, kernel=kernel, fixed=null, random_state=random_state)
        df = len(null)
        if restricted.loglik > unrestricted.loglik + 1e-8:
            # the unrestricted search stopped at a worse local optimum: restart it from the null fit
            again = fit_mle(family, trans, init=restricted.xi, kernel=kernel)
            if again.loglik > unrestricted.loglik:
                unrestricted = again
    stat = lr_statistic(unrestricted.loglik, restricted.loglik)
    return TestResult(stat, df, float(stats.chi2.sf(stat, df)), restricted, unrestricted, boundary,
                      {"null": null, "family": family.name, "kernel": kernel}, tuple(messages))
