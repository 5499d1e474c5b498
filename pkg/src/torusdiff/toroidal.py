"""Densities on the torus with conditional decompositions and the Rosenblatt map.

A toroidal density ``f`` on [0, 2pi)^p is decomposed as

    f(x) = f_1(x_1) f_2(x_2 | x_1) ... f_p(x_p | x_1..x_{p-1})

and the Rosenblatt map ``R(x) = (F_1(x_1), F_2(x_2 | x_1), ...)`` sends it to
conditionally uniform coordinates.  Each conditional CDF is extended to the
real line exactly like a circular CDF, so ``R`` is a bijection of R^p with
``R(x + 2 pi k) = R(x) + k``.
"""

import numpy as np

from .circular import (
    CircularDensity,
    SpectralDensity,
    density_from_dict,
    invert_unit_cdf,
    vm_centered_cdf,
    vm_pdf,
)
from .exceptions import DomainError
from .special import LOG_2PI, TWO_PI, log_bessel_i, log_bvm_normalizing_constant


def _points(x, p):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != p:
        raise DomainError(f"expected points with last dimension {p}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DomainError("non-finite coordinates")
    return x


class CovarianceSpec:
    """Diffusion covariance Sigma with its lower-triangular square root."""

    def __init__(self, sigma_matrix):
        S = np.atleast_2d(np.asarray(sigma_matrix, dtype=float))
        if S.shape[0] != S.shape[1]:
            raise DomainError("covariance must be square")
        if not np.allclose(S, S.T, rtol=0, atol=1e-12 * max(1.0, np.abs(S).max())):
            raise DomainError("covariance must be symmetric")
        S = 0.5 * (S + S.T)
        if np.linalg.eigvalsh(S)[0] <= 0:
            raise DomainError("covariance must be positive definite")
        self.sigma_matrix = S
        self.factor = np.linalg.cholesky(S)

    @classmethod
    def isotropic(cls, sigma, p):
        if not sigma > 0:
            raise DomainError("sigma must be positive")
        return cls(sigma * sigma * np.eye(p))

    @property
    def dim(self):
        return self.sigma_matrix.shape[0]

    def __repr__(self):
        return f"CovarianceSpec({self.sigma_matrix.tolist()})"


class ToroidalDensity:
    """Base class: subclasses provide the level-wise conditional pieces.

    ``conditional_pdf(level, xj, given)`` and ``conditional_cdf0(level, xj,
    given)`` (for ``xj`` in [0, 2pi)) are the hooks; ``given`` has shape
    (..., level - 1).  Levels are 1-based.
    """

    dim = 2

    def _check_level(self, level):
        if not 1 <= level <= self.dim:
            raise DomainError(f"level must be in 1..{self.dim}, got {level}")

    def conditional_cdf(self, level, xj, given=None):
        """Conditional CDF of coordinate ``level`` on the real line."""
        self._check_level(level)
        xj = np.asarray(xj, dtype=float)
        n = np.floor(xj / TWO_PI)
        g = self._given(level, given, xj.shape)
        return self.conditional_cdf0(level, xj - TWO_PI * n, g) + n

    def _given(self, level, given, shape):
        if level == 1:
            return np.zeros(shape + (0,))
        g = np.mod(np.asarray(given, dtype=float), TWO_PI)
        return np.broadcast_to(g, shape + (level - 1,))

    def logpdf(self, x):
        return np.log(self.pdf(x))

    def rosenblatt(self, x):
        """``R(x)`` for points of shape (..., p); valid on all of R^p."""
        x = _points(x, self.dim)
        out = np.empty_like(x)
        for j in range(1, self.dim + 1):
            out[..., j - 1] = self.conditional_cdf(j, x[..., j - 1], x[..., : j - 1])
        return out

    def rosenblatt_inverse(self, y):
        """``R^{-1}(y)`` by nested one-dimensional root finding."""
        y = _points(y, self.dim)
        shape = y.shape[:-1]
        flat = y.reshape(-1, self.dim)
        x = np.empty_like(flat)
        for j in range(1, self.dim + 1):
            n = np.floor(flat[:, j - 1])
            u = flat[:, j - 1] - n
            given = np.mod(x[:, : j - 1], TWO_PI)

            def cdf0(t, idx, j=j, given=given):
                return self.conditional_cdf0(j, t, given[idx])

            def pdf0(t, idx, j=j, given=given):
                return self.conditional_pdf(j, t, given[idx])

            x[:, j - 1] = invert_unit_cdf(cdf0, pdf0, u) + TWO_PI * n
        return x.reshape(shape + (self.dim,))

    def jacobian_determinant(self, x):
        """Product of the conditional densities, equal to ``f(x)``."""
        x = _points(x, self.dim)
        out = np.ones(x.shape[:-1])
        for j in range(1, self.dim + 1):
            out = out * self.conditional_pdf(j, x[..., j - 1], np.mod(x[..., : j - 1], TWO_PI))
        return out

    def rvs(self, size=None, random_state=None):
        rng = np.random.default_rng(random_state)
        shape = (() if size is None else tuple(np.atleast_1d(size))) + (self.dim,)
        return np.mod(self.rosenblatt_inverse(rng.uniform(size=shape)), TWO_PI)

    def min_density(self, grid=128):
        g = np.linspace(0, TWO_PI, grid, endpoint=False)
        mesh = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1)
        return float(np.min(self.pdf(mesh)))


class ProductDensity(ToroidalDensity):
    """Independent circular coordinates, any dimension."""

    structure = "product"

    def __init__(self, components):
        components = list(components)
        if not components or not all(isinstance(c, CircularDensity) for c in components):
            raise DomainError("product density needs circular components")
        self.components = components
        self.dim = len(components)

    def pdf(self, x):
        x = _points(x, self.dim)
        out = np.ones(x.shape[:-1])
        for j, c in enumerate(self.components):
            out = out * c.pdf(x[..., j])
        return out

    def conditional_pdf(self, level, xj, given=None):
        self._check_level(level)
        return self.components[level - 1].pdf(xj)

    def conditional_cdf0(self, level, xj, given=None):
        return self.components[level - 1]._cdf0(xj)

    def rosenblatt(self, x):
        x = _points(x, self.dim)
        return np.stack([c.cdf(x[..., j]) for j, c in enumerate(self.components)], axis=-1)

    def rosenblatt_inverse(self, y):
        y = _points(y, self.dim)
        return np.stack([c.ppf(y[..., j]) for j, c in enumerate(self.components)], axis=-1)

    # bivariate protocol, so products can be mixed with other p = 2 densities
    def marginal_pdf(self, x1):
        return self.components[0].pdf(x1)

    def marginal_cdf0(self, x1):
        return self.components[0]._cdf0(x1)

    def cond_pdf(self, x2, x1):
        return self.components[1].pdf(x2)

    def cond_cdf0(self, x2, x1):
        return self.components[1]._cdf0(x2)

    def to_dict(self):
        return {"family": "product", "components": [c.to_dict() for c in self.components]}


class _Bivariate(ToroidalDensity):
    """p = 2 densities described by a marginal and a conditional."""

    dim = 2

    def conditional_pdf(self, level, xj, given=None):
        self._check_level(level)
        if level == 1:
            return self.marginal_pdf(np.mod(xj, TWO_PI))
        return self.cond_pdf(xj, np.asarray(given)[..., 0])

    def conditional_cdf0(self, level, xj, given=None):
        if level == 1:
            return self.marginal_cdf0(xj)
        return self.cond_cdf0(xj, np.asarray(given)[..., 0])


class BivariateVonMises(_Bivariate):
    """Bivariate sine von Mises density BvM(mu1, mu2, kappa1, kappa2, lambda)."""

    structure = "bivariate_von_mises"

    def __init__(self, mu1=0.0, mu2=0.0, kappa1=1.0, kappa2=1.0, lam=0.0):
        vals = [mu1, mu2, kappa1, kappa2, lam]
        if not all(np.isfinite(vals)) or kappa1 < 0 or kappa2 < 0:
            raise DomainError("BvM needs finite parameters with kappa1, kappa2 >= 0")
        self.mu1, self.mu2 = float(mu1) % TWO_PI, float(mu2) % TWO_PI
        self.kappa1, self.kappa2, self.lam = float(kappa1), float(kappa2), float(lam)
        self.log_c = log_bvm_normalizing_constant(self.kappa1, self.kappa2, self.lam)
        self._marginal = SpectralDensity(self._marginal_formula)

    def pdf(self, x):
        x = _points(x, 2)
        d1, d2 = x[..., 0] - self.mu1, x[..., 1] - self.mu2
        return np.exp(self.log_c + self.kappa1 * np.cos(d1) + self.kappa2 * np.cos(d2)
                      + self.lam * np.sin(d1) * np.sin(d2))

    def conditional_params(self, x1):
        """``(mu_2lambda(x1), kappa_2lambda(x1))`` of the von Mises conditional."""
        s = np.sin(np.asarray(x1, dtype=float) - self.mu1)
        mu = self.mu2 + np.arctan2(self.lam * s, self.kappa2)
        kappa = np.sqrt(self.kappa2**2 + self.lam**2 * s * s)
        return mu, kappa

    def _marginal_formula(self, x1):
        _, k = self.conditional_params(x1)
        return np.exp(self.log_c + LOG_2PI + log_bessel_i(0, k) + self.kappa1 * np.cos(x1 - self.mu1))

    def marginal_pdf(self, x1):
        return self._marginal_formula(np.asarray(x1, dtype=float))

    def marginal_cdf0(self, x1):
        return self._marginal._cdf_real(x1)

    def cond_pdf(self, x2, x1):
        mu, k = self.conditional_params(x1)
        return vm_pdf(x2, mu, k)

    def cond_cdf0(self, x2, x1):
        mu, k = self.conditional_params(x1)
        x2 = np.asarray(x2, dtype=float)
        mu, k = np.broadcast_arrays(mu, k)
        mu = np.broadcast_to(mu, np.broadcast_shapes(mu.shape, x2.shape))
        k = np.broadcast_to(k, mu.shape)
        return vm_centered_cdf(x2 - mu, k) - vm_centered_cdf(-mu, k)

    def to_dict(self):
        return {"family": "bvm", "mu1": self.mu1, "mu2": self.mu2, "kappa1": self.kappa1,
                "kappa2": self.kappa2, "lambda": self.lam}

    def __repr__(self):
        return (f"BivariateVonMises(mu1={self.mu1:.6g}, mu2={self.mu2:.6g}, kappa1={self.kappa1:.6g}, "
                f"kappa2={self.kappa2:.6g}, lam={self.lam:.6g})")


class UniformTorus(_Bivariate):
    structure = "uniform"

    def pdf(self, x):
        x = _points(x, 2)
        return np.full(x.shape[:-1], 1.0 / TWO_PI**2)

    def marginal_pdf(self, x1):
        return np.full(np.shape(x1), 1.0 / TWO_PI)

    def marginal_cdf0(self, x1):
        return np.asarray(x1, dtype=float) / TWO_PI

    def cond_pdf(self, x2, x1):
        return np.full(np.broadcast_shapes(np.shape(x2), np.shape(x1)), 1.0 / TWO_PI)

    def cond_cdf0(self, x2, x1):
        return np.broadcast_to(np.asarray(x2, dtype=float) / TWO_PI,
                               np.broadcast_shapes(np.shape(x2), np.shape(x1)))

    def to_dict(self):
        return {"family": "uniform_torus"}


class ToroidalMixture(_Bivariate):
    """Finite mixture of p = 2 densities.

    The conditional of the second coordinate is the mixture of component
    conditionals with weights ``w_j f_{1,j}(x1) / sum_m w_m f_{1,m}(x1)``.
    """

    structure = "bvm_mixture"

    def __init__(self, weights, components):
        w = np.asarray(weights, dtype=float)
        components = list(components)
        if w.ndim != 1 or w.size != len(components) or w.size == 0:
            raise DomainError("one weight per component is required")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise DomainError("mixture weights must be non-negative and sum to 1")
        self.weights = w / w.sum()
        self.components = components

    def pdf(self, x):
        return sum(w * c.pdf(x) for w, c in zip(self.weights, self.components))

    def _marginals(self, x1):
        return [w * c.marginal_pdf(x1) for w, c in zip(self.weights, self.components)]

    def marginal_pdf(self, x1):
        return sum(self._marginals(x1))

    def marginal_cdf0(self, x1):
        return sum(w * c.marginal_cdf0(x1) for w, c in zip(self.weights, self.components))

    def cond_pdf(self, x2, x1):
        m = self._marginals(x1)
        num = sum(mj * c.cond_pdf(x2, x1) for mj, c in zip(m, self.components))
        return num / sum(m)

    def cond_cdf0(self, x2, x1):
        m = self._marginals(x1)
        num = sum(mj * c.cond_cdf0(x2, x1) for mj, c in zip(m, self.components))
        return num / sum(m)

    def to_dict(self):
        if getattr(self, "structure", None) == "blended":
            d = self.base.to_dict()
            d["alpha"] = self.alpha
            return d
        comps = []
        for w, c in zip(self.weights, self.components):
            d = c.to_dict()
            d["w"] = float(w)
            comps.append(d)
        plain = all(isinstance(c, BivariateVonMises) for c in self.components)
        return {"family": "bvm_mixture" if plain else "mixture", "components": comps}


def blended(base, alpha):
    """``(1 - alpha) f + alpha / (2 pi)^2``: mixing with the uniform torus."""
    if not 0 <= alpha <= 1:
        raise DomainError("alpha must lie in [0, 1]")
    if base.dim != 2:
        raise DomainError("blending is implemented for p = 2")
    mix = ToroidalMixture([1.0 - alpha, alpha], [base, UniformTorus()])
    mix.structure = "blended"
    mix.alpha = float(alpha)
    mix.base = base
    return mix


def _bvm_from_dict(d):
    return BivariateVonMises(d.get("mu1", 0.0), d.get("mu2", 0.0), d["kappa1"], d["kappa2"],
                             d.get("lambda", 0.0))


def toroidal_from_dict(spec):
    """Build a toroidal density from its JSON description."""
    spec = dict(spec)
    alpha = spec.pop("alpha", None)
    family = spec.get("family")
    if family == "bvm":
        dens = _bvm_from_dict(spec)
    elif family == "bvm_mixture":
        comps = spec["components"]
        dens = ToroidalMixture([c["w"] for c in comps], [_bvm_from_dict(c) for c in comps])
    elif family == "mixture":
        comps = [dict(c) for c in spec["components"]]
        dens = ToroidalMixture([c.pop("w") for c in comps], [toroidal_from_dict(c) for c in comps])
    elif family == "product":
        dens = ProductDensity([density_from_dict(c) for c in spec["components"]])
    elif family == "uniform_torus":
        dens = UniformTorus()
    else:
        raise DomainError(f"unknown toroidal family {family!r}")
    if alpha is not None:
        dens = blended(dens, float(alpha))
    return dens


def is_toroidal_spec(spec):
    return spec.get("family") in {"bvm", "bvm_mixture", "mixture", "product", "uniform_torus"}


__all__ = [
    "BivariateVonMises",
    "CovarianceSpec",
    "ProductDensity",
    "ToroidalDensity",
    "ToroidalMixture",
    "UniformTorus",
    "blended",
    "toroidal_from_dict",
]
