"""Circular and toroidal diffusions with closed-form transition densities.

The diffusion with stationary density ``f`` is the image of a (correlated)
Brownian motion under the inverse Rosenblatt map,

    Theta_t = R^{-1}(Sigma^{1/2} W_t + R(theta_0)) mod 2 pi,

so exact simulation only needs Gaussian increments in transform space, and
the transition density is a wrapped normal evaluated at ``R(theta)``
times ``f``.
"""

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from ._seeding import as_generator
from .circular import CircularCdf, CircularDensity
from .exceptions import DomainError, SingularityError
from .special import TWO_PI, log_periodic_gaussian_sum, log_periodic_gaussian_sum_mv
from .toroidal import CovarianceSpec, ProductDensity, ToroidalDensity

POSITIVITY_FLOOR = 1e-8
_FD_STEP = 1e-5
_FD_STEP_OUTER = 1e-4


class DiffusionModel:
    """Stationary density plus volatility.

    For a circular density ``sigma`` is the scalar volatility.  For a
    toroidal density it may be a scalar (isotropic ``sigma**2 I``), a
    covariance matrix, or a :class:`CovarianceSpec`.
    """

    def __init__(self, density, sigma):
        self.density = density
        if isinstance(density, CircularDensity):
            self.dim = 1
            if np.ndim(sigma) != 0 or not float(sigma) > 0:
                raise DomainError("circular diffusions need a scalar sigma > 0")
            self.sigma = float(sigma)
            self.covariance = CovarianceSpec([[self.sigma**2]])
            self._cdf = CircularCdf(density)
        elif isinstance(density, ToroidalDensity):
            self.dim = density.dim
            if isinstance(sigma, CovarianceSpec):
                cov = sigma
            elif np.ndim(sigma) == 0:
                cov = CovarianceSpec.isotropic(float(sigma), self.dim)
            else:
                cov = CovarianceSpec(sigma)
            if cov.dim != self.dim:
                raise DomainError("covariance dimension does not match the density")
            self.covariance = cov
            self.sigma = float(np.sqrt(cov.sigma_matrix[0, 0])) if self.dim else None
        else:
            raise DomainError("density must be circular or toroidal")

    @property
    def is_circular(self):
        return self.dim == 1 and isinstance(self.density, CircularDensity)

    def transform(self, x):
        """``F`` (p = 1) or ``R`` applied to points of shape (..., p)."""
        x = np.asarray(x, dtype=float)
        if self.is_circular:
            return self.density.cdf(x[..., 0])[..., None]
        return self.density.rosenblatt(x)

    def inverse_transform(self, y):
        y = np.asarray(y, dtype=float)
        if self.is_circular:
            return self._cdf.inverse_cdf(y[..., 0])[..., None]
        return self.density.rosenblatt_inverse(y)

    def stationary_pdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.is_circular:
            return self.density.pdf(x[..., 0])
        return self.density.pdf(x)

    def __repr__(self):
        vol = self.sigma if self.is_circular else self.covariance.sigma_matrix.tolist()
        return f"DiffusionModel({self.density!r}, sigma={vol})"


def _as_points(theta, p):
    theta = np.asarray(theta, dtype=float)
    if p == 1 and (theta.ndim == 0 or theta.shape[-1] != 1):
        theta = theta[..., None]
    if theta.shape[-1] != p:
        raise DomainError(f"expected angles of dimension {p}")
    if not np.all(np.isfinite(theta)):
        raise DomainError("non-finite angle")
    return theta


@dataclass
class PathSample:
    """Discretely observed trajectory: ``angles[i]`` is the state at ``i * delta``."""

    delta: float
    angles: np.ndarray
    labels: dict = field(default_factory=dict)

    def __post_init__(self):
        a = np.asarray(self.angles, dtype=float)
        if a.ndim == 1:
            a = a[:, None]
        if a.ndim != 2 or a.shape[0] < 1:
            raise DomainError("angles must be an (n + 1) x p matrix")
        if not self.delta > 0:
            raise DomainError("delta must be positive")
        if not np.all(np.isfinite(a)):
            raise DomainError("non-finite angle in path")
        self.angles = np.mod(a, TWO_PI)
        self.delta = float(self.delta)

    @property
    def n(self):
        """Number of transitions."""
        return self.angles.shape[0] - 1

    @property
    def dim(self):
        return self.angles.shape[1]

    @property
    def theta(self):
        """The 1-d angle sequence of a circular path."""
        if self.dim != 1:
            raise DomainError("theta is only defined for circular paths")
        return self.angles[:, 0]

    @property
    def times(self):
        return self.delta * np.arange(self.n + 1)

    def to_csv(self, target=None):
        """Write ``t,theta1[,theta2,...]`` rows; returns the text if ``target`` is None."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + [f"theta{j + 1}" for j in range(self.dim)])
        for t, row in zip(self.times, self.angles):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in row])
        text = buf.getvalue()
        if target is None:
            return text
        with open(target, "w", newline="") as fh:
            fh.write(text)
        return None

    @classmethod
    def from_csv(cls, source, delta=None):
        if isinstance(source, str) and "\n" in source:
            text = source
        else:
            with open(source) as fh:
                text = fh.read()
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], [r for r in rows[1:] if r]
        if header[0] != "t" or not all(h.startswith("theta") for h in header[1:]):
            raise DomainError("path CSV header must be t,theta1[,theta2,...]")
        data = np.array(body, dtype=float)
        t = data[:, 0]
        if delta is None:
            if t.size < 2:
                raise DomainError("cannot infer delta from a single row")
            steps = np.diff(t)
            delta = float(steps[0])
            if not np.allclose(steps, delta, rtol=1e-9, atol=1e-12):
                raise DomainError("path times are not equally spaced")
        return cls(delta, data[:, 1:])


def simulate_paths(model, theta0, n, delta, random_state=None, size=1):
    """Exact simulation of ``size`` independent paths; returns (size, n + 1, p).

    Gaussian increments are accumulated in transform space and mapped back
    through the inverse transform; the unwrapped transform-space state is
    carried along and angles are wrapped once per stored observation.
    """
    if n < 0 or int(n) != n:
        raise DomainError("n must be a non-negative integer")
    if not delta > 0:
        raise DomainError("delta must be positive")
    rng = as_generator(random_state)
    p = model.dim
    theta0 = np.mod(_as_points(theta0, p), TWO_PI)
    theta0 = np.broadcast_to(theta0, (size, p))
    out = np.empty((size, n + 1, p))
    out[:, 0] = theta0
    if n == 0:
        return out
    y0 = model.transform(theta0)
    z = rng.standard_normal((size, n, p)) @ model.covariance.factor.T * np.sqrt(delta)
    y = y0[:, None, :] + np.cumsum(z, axis=1)
    out[:, 1:] = np.mod(model.inverse_transform(y), TWO_PI)
    return out


def simulate_exact(model, theta0, n, delta, random_state=None):
    """Exact simulation of one path as a :class:`PathSample`."""
    return PathSample(delta, simulate_paths(model, theta0, n, delta, random_state)[0])


class TransitionKernel:
    """Transition density ``p_t(theta_to | theta_from)`` of a diffusion model.

    ``h(theta_from, theta_to) = R(theta_to) - R(theta_from)`` is the winding
    base point: the density is ``f(theta_to) * sum_k phi_{t Sigma}(h + k)``.
    """

    def __init__(self, model):
        self.model = model

    def winding_base(self, theta_from, theta_to):
        p = self.model.dim
        return self.model.transform(_as_points(theta_to, p)) - self.model.transform(_as_points(theta_from, p))

    def logpdf(self, theta_from, theta_to, t):
        if not t > 0:
            raise DomainError("elapsed time must be positive")
        m = self.model
        h = self.winding_base(theta_from, theta_to)
        log_f = np.log(m.stationary_pdf(np.mod(_as_points(theta_to, m.dim), TWO_PI)))
        if m.dim == 1:
            return log_f + log_periodic_gaussian_sum(h[..., 0], t * m.sigma**2)
        return log_f + log_periodic_gaussian_sum_mv(h, t * m.covariance.sigma_matrix)

    def pdf(self, theta_from, theta_to, t):
        return np.exp(self.logpdf(theta_from, theta_to, t))


def transition_density(model, theta_from, theta_to, t, log=False):
    """Closed-form transition density of the diffusion (log-space with ``log``)."""
    k = TransitionKernel(model)
    return k.logpdf(theta_from, theta_to, t) if log else k.pdf(theta_from, theta_to, t)


def _floor_check(f):
    if np.any(f < POSITIVITY_FLOOR):
        raise SingularityError(f"density below the positivity floor {POSITIVITY_FLOOR:g}")


def _central(fn, x, step):
    return (fn(x + step) - fn(x - step)) / (2.0 * step)


def sde_coefficients(model, theta, absorb_constant=False, generic=False):
    """Drift vector and diffusion matrix of the SDE at ``theta``.

    Returns arrays of shape (..., p) and (..., p, p).  With
    ``absorb_constant`` the circular family's normalizing constant is
    folded into sigma (the density kernel is used unnormalized).  For p = 2
    the generic form is used unless the density is a product; ``generic``
    forces it for products as a consistency check.
    """
    p = model.dim
    theta = np.mod(_as_points(theta, p), TWO_PI)
    dens = model.density
    L = model.covariance.factor
    S = model.covariance.sigma_matrix
    if model.is_circular:
        x = theta[..., 0]
        f, df = dens.pdf(x), dens.dpdf(x)
        _floor_check(f)
        c = dens.normalizing_constant if absorb_constant else 1.0
        drift = -model.sigma**2 * df / (2.0 * f**3) / c**2
        diff = model.sigma / f / c
        return drift[..., None], diff[..., None, None]
    if isinstance(dens, ProductDensity) and not generic:
        f = np.stack([c.pdf(theta[..., j]) for j, c in enumerate(dens.components)], axis=-1)
        df = np.stack([c.dpdf(theta[..., j]) for j, c in enumerate(dens.components)], axis=-1)
        _floor_check(f)
        drift = -0.5 * np.diag(S) * df / f**3
        diff = (1.0 / f)[..., :, None] * L
        return drift, diff
    if p != 2:
        raise DomainError("non-product SDE coefficients are implemented for p = 2 only")
    return _coefficients_p2(dens, theta, S, L)


def _coefficients_p2(dens, theta, S, L):
    x1, x2 = theta[..., 0], theta[..., 1]

    def F2(a, b):
        return dens.conditional_cdf(2, b, a[..., None])

    def f2(a, b):
        return dens.conditional_pdf(2, b, np.mod(a, TWO_PI)[..., None])

    def f1(a):
        return dens.conditional_pdf(1, a)

    def h(a, b):
        dF = (F2(a + _FD_STEP, b) - F2(a - _FD_STEP, b)) / (2.0 * _FD_STEP)
        return dF / (f1(a) * f2(a, b))

    v1, v2 = f1(x1), f2(x1, x2)
    _floor_check(v1)
    _floor_check(v2)
    d1 = _central(f1, x1, _FD_STEP)
    d2 = _central(lambda b: f2(x1, b), x2, _FD_STEP)
    hv = h(x1, x2)
    h_x1 = _central(lambda a: h(a, x2), x1, _FD_STEP_OUTER)
    h_x2 = _central(lambda b: h(x1, b), x2, _FD_STEP_OUTER)
    b_term = h_x1 / v1 - h_x2 * hv
    drift1 = -0.5 * S[0, 0] * d1 / v1**3
    drift2 = 0.5 * (-S[0, 0] * b_term - 2.0 * S[0, 1] * h_x2 / v2 - S[1, 1] * d2 / v2**3)
    J = np.zeros(theta.shape[:-1] + (2, 2))
    J[..., 0, 0] = 1.0 / v1
    J[..., 1, 0] = -hv
    J[..., 1, 1] = 1.0 / v2
    return np.stack([drift1, drift2], axis=-1), J @ L


def simulate_euler(model, theta0, n, delta, substeps, random_state=None, size=1):
    """Euler-Maruyama reference integrator; returns (size, n + 1, p) angles.

    Wraps the state at every substep.  Intended as an independent check of
    the exact simulator and of :func:`sde_coefficients`.
    """
    if substeps < 1 or int(substeps) != substeps:
        raise DomainError("substeps must be a positive integer")
    if not delta > 0:
        raise DomainError("delta must be positive")
    rng = as_generator(random_state)
    p = model.dim
    x = np.array(np.broadcast_to(np.mod(_as_points(theta0, p), TWO_PI), (size, p)))
    out = np.empty((size, n + 1, p))
    out[:, 0] = x
    dt = delta / substeps
    sq = np.sqrt(dt)
    for i in range(n):
        for _ in range(substeps):
            drift, diff = sde_coefficients(model, x)
            noise = rng.standard_normal((size, p))
            x = np.mod(x + drift * dt + np.einsum("...ij,...j->...i", diff, noise) * sq, TWO_PI)
        out[:, i + 1] = x
    return out
