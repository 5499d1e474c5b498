"""Toroidal densities and their Rosenblatt transform."""

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import integrate, stats

from torusdiff.circular import Uniform, VonMises, WrappedCauchy
from torusdiff.exceptions import DomainError
from torusdiff.special import TWO_PI
from torusdiff.toroidal import (
    BivariateVonMises, CovarianceSpec, ProductDensity, ToroidalMixture, UniformTorus, blended,
    toroidal_from_dict,
)


def torus_zoo():
    return {
        "uniform": UniformTorus(),
        "product": ProductDensity([VonMises(1.0, 2.0), WrappedCauchy(3.0, 0.3)]),
        "bvm": BivariateVonMises(0.5, 4.0, 1.5, 2.0, 1.2),
        "bvm_mixture": ToroidalMixture([0.4, 0.6], [BivariateVonMises(0.5, 1.0, 2.0, 1.0, 0.8),
                                                    BivariateVonMises(3.5, 4.0, 1.0, 3.0, -1.0)]),
        "blended": blended(BivariateVonMises(1.0, 2.0, 6.0, 6.0, 2.0), 0.1),
    }


@pytest.fixture(params=list(torus_zoo()))
def torus(request):
    return torus_zoo()[request.param]


def grid_points(m=7, lo=-6 * np.pi, hi=6 * np.pi, seed=0):
    rng = np.random.default_rng(seed)
    return rng.uniform(lo, hi, (m * m, 2))


class TestDensity:
    def test_integrates_to_one(self, torus):
        val, _ = integrate.dblquad(lambda y, x: float(torus.pdf(np.array([x, y]))), 0, TWO_PI, 0, TWO_PI,
                                   epsabs=1e-10, epsrel=1e-10)
        assert abs(val - 1) < 1e-8

    def test_conditionals_integrate_to_one(self, torus):
        for x1 in (0.3, 2.0, 5.5):
            val, _ = integrate.quad(lambda t: float(torus.conditional_pdf(2, t, np.array([x1]))), 0, TWO_PI,
                                    epsabs=1e-13)
            assert abs(val - 1) < 1e-9

    def test_bvm_independent_case_factorises(self):
        b = BivariateVonMises(1.0, 2.0, 1.5, 0.7, 0.0)
        x = grid_points(5, 0, TWO_PI)
        assert_allclose(b.pdf(x), VonMises(1.0, 1.5).pdf(x[:, 0]) * VonMises(2.0, 0.7).pdf(x[:, 1]), rtol=1e-12)
        assert_allclose(b.conditional_pdf(2, x[:, 1], x[:, :1]), VonMises(2.0, 0.7).pdf(x[:, 1]), rtol=1e-12)

    def test_product_conditional_is_marginal(self):
        d = ProductDensity([VonMises(1.0, 2.0), WrappedCauchy(3.0, 0.3)])
        x = grid_points(5, 0, TWO_PI)
        assert_allclose(d.conditional_pdf(2, x[:, 1], x[:, :1]), WrappedCauchy(3.0, 0.3).pdf(x[:, 1]),
                        rtol=1e-13)

    def test_mixture_weights_validated(self):
        with pytest.raises(DomainError):
            ToroidalMixture([0.5, 0.4], [UniformTorus(), UniformTorus()])

    def test_blend_range(self):
        with pytest.raises(DomainError):
            blended(UniformTorus(), 1.5)


class TestRosenblatt:
    def test_uniform_is_scaling(self):
        x = grid_points()
        assert_allclose(UniformTorus().rosenblatt(x), x / TWO_PI, atol=1e-13)

    def test_winding_shift(self, torus):
        x = grid_points(4, 0, TWO_PI)
        for k in [(1, 0), (0, -2), (3, 1)]:
            k = np.array(k)
            assert_allclose(torus.rosenblatt(x + TWO_PI * k) - torus.rosenblatt(x), np.broadcast_to(k, x.shape),
                            atol=1e-11)

    def test_bvm_centre(self):
        r = BivariateVonMises(0, 0, 1, 1, 0.5).rosenblatt(np.array([np.pi, np.pi]))
        assert_allclose(r, [0.5, 0.5], atol=1e-12)

    def test_round_trip(self, torus):
        x = grid_points(6)
        assert_allclose(torus.rosenblatt_inverse(torus.rosenblatt(x)), x, atol=1e-7)

    def test_jacobian_equals_density(self, torus):
        x = grid_points(4, 0, TWO_PI, seed=3)
        h = 1e-5
        J = np.empty(x.shape[:1] + (2, 2))
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            J[..., j] = (torus.rosenblatt(x + e) - torus.rosenblatt(x - e)) / (2 * h)
        det = np.linalg.det(J)
        assert_allclose(det, torus.pdf(x), rtol=1e-5)
        assert_allclose(torus.jacobian_determinant(x), torus.pdf(x), rtol=1e-12)

    def test_triangular_structure(self, torus):
        # the first coordinate of R ignores the second angle
        x = grid_points(4, 0, TWO_PI)
        y = x.copy()
        y[:, 1] += 1.3
        assert_allclose(torus.rosenblatt(x)[:, 0], torus.rosenblatt(y)[:, 0], atol=1e-15)

    def test_conditional_periodic_in_given(self, torus):
        t = np.linspace(0, 6, 7)
        a = torus.conditional_cdf(2, t, np.array([1.1]))
        b = torus.conditional_cdf(2, t, np.array([1.1 + 4 * np.pi]))
        assert_allclose(a, b, atol=1e-12)

    def test_rejects_bad_shape(self, torus):
        with pytest.raises(DomainError):
            torus.rosenblatt(np.zeros((3, 3)))

    def test_level_out_of_range(self, torus):
        with pytest.raises(DomainError):
            torus.conditional_cdf(3, 0.0, np.zeros(2))


class TestSampling:
    def test_marginal_ks(self):
        b = BivariateVonMises(0.5, 4.0, 1.5, 2.0, 1.2)
        x = b.rvs(3000, random_state=1)
        assert x.shape == (3000, 2)
        u = b.rosenblatt(x)
        assert stats.kstest(u[:, 0], "uniform").pvalue > 1e-3
        assert stats.kstest(u[:, 1], "uniform").pvalue > 1e-3


class TestCovariance:
    def test_cholesky(self):
        S = np.array([[1.0, 0.3], [0.3, 0.5]])
        c = CovarianceSpec(S)
        assert_allclose(c.factor @ c.factor.T, S, atol=1e-15)
        assert c.factor[0, 1] == 0.0

    def test_isotropic(self):
        assert_allclose(CovarianceSpec.isotropic(0.2, 3).sigma_matrix, 0.04 * np.eye(3))

    @pytest.mark.parametrize("S", [[[1, 0.5], [0.4, 1]], [[1, 2], [2, 1]]])
    def test_invalid(self, S):
        with pytest.raises(DomainError):
            CovarianceSpec(S)


class TestSerialisation:
    def test_round_trip(self):
        spec = {"family": "bvm_mixture", "alpha": 0.05,
                "components": [{"w": 0.5, "mu1": 0, "mu2": 1, "kappa1": 1, "kappa2": 2, "lambda": 0.5},
                               {"w": 0.5, "mu1": 3, "mu2": 3, "kappa1": 2, "kappa2": 1, "lambda": -0.5}]}
        d = toroidal_from_dict(spec)
        x = grid_points(3, 0, TWO_PI)
        assert np.all(d.pdf(x) > 0)
        assert_allclose(toroidal_from_dict(d.to_dict()).pdf(x), d.pdf(x), rtol=1e-13)

    def test_product_of_uniforms(self):
        d = toroidal_from_dict({"family": "product", "components": [{"family": "uniform"}] * 2})
        assert_allclose(d.pdf(np.array([1.0, 2.0])), 1 / TWO_PI**2)
        assert isinstance(d.components[0], Uniform)
