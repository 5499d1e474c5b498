"""Circular stationary densities: values, CDF transform, inversion, sampling."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy import integrate, stats

from conftest import circular_zoo
from torusdiff.circular import (
    CircularCdf, SpectralDensity, Uniform, VonMises, VonMisesMixture, WrappedCauchy, density_from_dict,
)
from torusdiff.exceptions import DomainError
from torusdiff.special import TWO_PI, bessel_i


class TestPdf:
    def test_uniform(self):
        assert_allclose(Uniform().pdf(np.linspace(0, 6, 7)), 1 / TWO_PI)

    def test_von_mises_value_and_mode(self):
        d = VonMises(1.2, 3.0)
        assert_allclose(d.pdf(0.3), np.exp(3 * np.cos(0.3 - 1.2)) / (TWO_PI * bessel_i(0, 3.0)), rtol=1e-14)
        assert abs(d.dpdf(1.2)) < 1e-14

    def test_wrapped_cauchy_formula(self):
        mu, rho, x = 2.0, 0.6, 0.4
        ref = (1 - rho**2) / (TWO_PI * (1 + rho**2 - 2 * rho * np.cos(x - mu)))
        assert_allclose(WrappedCauchy(mu, rho).pdf(x), ref, rtol=1e-14)

    def test_integrates_to_one(self, circular_density):
        val, _ = integrate.quad(circular_density.pdf, 0, TWO_PI, epsabs=1e-13, limit=200)
        assert abs(val - 1) < 1e-9

    def test_derivative_matches_finite_difference(self, circular_density):
        x = np.linspace(0.1, 6.1, 25)
        h = 1e-5
        fd = (circular_density.pdf(x + h) - circular_density.pdf(x - h)) / (2 * h)
        scale = np.max(np.abs(fd)) + 1e-300
        assert np.max(np.abs(circular_density.dpdf(x) - fd)) <= 1e-5 * max(scale, 1.0)

    def test_logpdf_consistent(self, circular_density):
        x = np.linspace(0, TWO_PI, 33)
        assert_allclose(circular_density.logpdf(x), np.log(circular_density.pdf(x)), rtol=1e-12)

    def test_invalid_parameters(self):
        with pytest.raises(DomainError):
            VonMises(0.0, -1.0)
        with pytest.raises(DomainError):
            WrappedCauchy(0.0, 1.0)
        with pytest.raises(DomainError):
            VonMisesMixture([0.5, 0.6], [0, 1], [1, 1])


class TestCdf:
    @pytest.mark.parametrize("d", [Uniform(), VonMises(0.0, 2.0)])
    def test_half_at_pi(self, d):
        assert abs(d.cdf(np.pi) - 0.5) < 1e-12

    def test_winding_identity(self, circular_density):
        x = np.linspace(-20, 20, 101)
        assert_allclose(circular_density.cdf(x + TWO_PI) - circular_density.cdf(x), 1.0, atol=1e-12)
        assert abs(circular_density.cdf(0.0)) < 1e-14

    def test_matches_quadrature(self, circular_density):
        for x in (0.7, 2.5, 5.9):
            val, _ = integrate.quad(circular_density.pdf, 0, x, epsabs=1e-13)
            assert abs(circular_density.cdf(x) - val) < 1e-10

    def test_monotone(self, circular_density):
        x = np.linspace(-3 * TWO_PI, 3 * TWO_PI, 5001)
        assert np.all(np.diff(circular_density.cdf(x)) > 0)

    def test_uniform_is_linear(self):
        x = np.linspace(-10, 10, 21)
        assert_allclose(Uniform().cdf(x), x / TWO_PI, atol=1e-14)


class TestInverse:
    def test_round_trip(self, circular_density):
        x = np.linspace(-10 * np.pi, 10 * np.pi, 401)
        assert_allclose(circular_density.ppf(circular_density.cdf(x)), x, atol=1e-8)

    def test_known_quantiles(self):
        assert_allclose(Uniform().ppf(0.25), np.pi / 2, atol=1e-12)
        assert_allclose(VonMises(0.0, 2.0).ppf(0.5), np.pi, atol=1e-10)

    def test_interpolated_cdf_object(self, circular_density):
        c = CircularCdf(circular_density)
        u = np.linspace(-2, 3, 77)
        assert_allclose(c.cdf(c.inverse_cdf(u)), u, atol=1e-12)

    def test_concentrated_table(self):
        d = VonMises(2.0, 400.0)
        u = np.linspace(0.001, 0.999, 11)
        assert_allclose(d.cdf(CircularCdf(d).inverse_cdf(u)), u, atol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(kappa=st.floats(0.0, 50.0), mu=st.floats(-10, 10), y=st.floats(-5, 5))
    def test_von_mises_round_trip_property(self, kappa, mu, y):
        d = VonMises(mu, kappa)
        assert abs(d.cdf(d.ppf(y)) - y) < 1e-10


class TestSampling:
    def test_uniform_ks(self):
        x = Uniform().rvs(5000, random_state=1)
        assert stats.kstest(x, "uniform", args=(0, TWO_PI)).statistic < 0.02

    def test_von_mises_circular_mean(self):
        x = VonMises(1.0, 2.0).rvs(5000, random_state=2)
        m = np.angle(np.mean(np.exp(1j * x)))
        assert abs(m - 1.0) < 0.05

    def test_samples_follow_cdf(self, circular_density):
        x = circular_density.rvs(4000, random_state=3)
        assert np.all((x >= 0) & (x < TWO_PI))
        assert stats.kstest(x, circular_density.cdf).pvalue > 1e-3

    def test_empty(self):
        assert VonMises(0, 1).rvs(0, random_state=0).shape == (0,)

    def test_reproducible(self):
        a = VonMises(0, 1).rvs(10, random_state=7)
        b = VonMises(0, 1).rvs(10, random_state=7)
        assert np.array_equal(a, b)


class TestParameterDerivatives:
    @pytest.mark.parametrize("name", ["von_mises", "wrapped_cauchy", "mixture"])
    def test_finite_differences(self, name):
        d = circular_zoo()[name]
        x = np.linspace(0.2, 6.0, 13)
        p = d.params
        g_log = d.dlogpdf_dparams(x)
        g_cdf = d.dcdf_dparams(x)
        for j in range(p.size):
            h = 1e-6 * max(1.0, abs(p[j]))
            up, dn = p.copy(), p.copy()
            up[j] += h
            dn[j] -= h
            du, dd = type(d).from_params(up), type(d).from_params(dn)
            fd_log = (du.logpdf(x) - dd.logpdf(x)) / (2 * h)
            fd_cdf = (du.cdf(x) - dd.cdf(x)) / (2 * h)
            assert_allclose(g_log[:, j], fd_log, rtol=1e-5, atol=1e-7)
            assert_allclose(g_cdf[:, j], fd_cdf, rtol=1e-5, atol=1e-7)


class TestSpectral:
    def test_recovers_von_mises(self):
        vm = VonMises(0.8, 2.5)
        sp = SpectralDensity(lambda t: 3.0 * np.exp(2.5 * np.cos(t - 0.8)))
        x = np.linspace(0, TWO_PI, 50)
        assert_allclose(sp.pdf(x), vm.pdf(x), rtol=1e-12)
        assert_allclose(sp.cdf(x), vm.cdf(x), atol=1e-12)

    def test_rejects_nonpositive(self):
        with pytest.raises(DomainError):
            SpectralDensity(lambda t: np.cos(t))


class TestSerialisation:
    def test_round_trip(self, circular_density):
        d2 = density_from_dict(circular_density.to_dict())
        x = np.linspace(0, TWO_PI, 9)
        assert_allclose(d2.pdf(x), circular_density.pdf(x), rtol=1e-14)

    def test_unknown_family(self):
        with pytest.raises(DomainError):
            density_from_dict({"family": "cardioid"})
