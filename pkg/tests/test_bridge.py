"""Exact diffusion bridges: winding law, Brownian-bridge construction, marginals."""

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import integrate, stats

from torusdiff.bridge import BridgeSpec, bridge_marginal_density, sample_bridge, sample_bridges, winding_distribution
from torusdiff.circular import Uniform, VonMises, WrappedCauchy
from torusdiff.diffusion import DiffusionModel
from torusdiff.exceptions import DomainError
from torusdiff.special import TWO_PI, wrapped_normal_pdf
from torusdiff.toroidal import BivariateVonMises


def marginal_cdf(spec, t, m=8001):
    grid = np.linspace(0, TWO_PI, m)
    dens = bridge_marginal_density(spec, t, grid)
    cum = integrate.cumulative_trapezoid(dens, grid, initial=0.0)
    return lambda x: np.interp(x, grid, cum / cum[-1])


class TestWindingLaw:
    def test_symmetric_when_endpoints_coincide(self):
        spec = BridgeSpec(DiffusionModel(VonMises(0.0, 2.0), 0.6), 1.3, 1.3, 2.0, [1.0])
        tab = winding_distribution(spec)
        prob = dict(zip(tab.ks[:, 0].tolist(), tab.probs))
        for k in range(1, 4):
            assert abs(prob[k] - prob[-k]) < 1e-14

    def test_sums_to_one(self):
        spec = BridgeSpec(DiffusionModel(WrappedCauchy(1.0, 0.4), 1.5), 0.3, 5.0, 3.0, [1.0])
        assert abs(winding_distribution(spec).probs.sum() - 1) < 1e-12

    def test_no_winding_in_short_time(self):
        for T in (1e-2, 1e-4):
            spec = BridgeSpec(DiffusionModel(VonMises(0.0, 2.0), 0.25), 1.0, 1.2, T, [T / 2])
            tab = winding_distribution(spec)
            assert tab.probs[tab.ks[:, 0] == 0][0] > 1 - 1e-12

    def test_torus_table(self):
        spec = BridgeSpec(DiffusionModel(BivariateVonMises(0, 1, 1, 2, 0.5), [[0.5, 0.1], [0.1, 0.3]]),
                          [0.1, 0.2], [3.0, 6.0], 1.0, [0.5])
        tab = winding_distribution(spec)
        assert tab.ks.shape[1] == 2
        assert abs(tab.probs.sum() - 1) < 1e-12


class TestConstruction:
    def test_uniform_midpoint(self):
        sigma, T = 0.8, 2.0
        spec = BridgeSpec(DiffusionModel(Uniform(), sigma), 0.5, 4.0, T, [T / 2])
        draws = sample_bridges(spec, random_state=0, size=4000)
        y = np.array([d.endpoint[0] for d in draws])
        u = np.array([d.transform[0, 0] for d in draws])
        # given y the midpoint of a Brownian bridge in standard units is N(y / 2, T / 4)
        z = u - y / 2
        se = np.sqrt(T / 4 / z.size)
        assert abs(z.mean()) < 3 * se
        assert stats.kstest(z / np.sqrt(T / 4), "norm").pvalue > 1e-3

    def test_endpoint_identity(self):
        model = DiffusionModel(BivariateVonMises(0, 1, 1, 2, 0.5), [[0.5, 0.1], [0.1, 0.3]])
        spec = BridgeSpec(model, [0.1, 0.2], [3.0, 6.0], 1.0, [0.3, 0.6])
        for d in sample_bridges(spec, random_state=1, size=20):
            L = model.covariance.factor
            assert_allclose(L @ d.endpoint - d.winding, spec.winding_base, atol=1e-12)
            assert d.states.shape == (2, 2)
            assert np.all((d.states >= 0) & (d.states < TWO_PI))

    def test_marginal_ks(self):
        spec = BridgeSpec(DiffusionModel(VonMises(0.0, 2.0), 0.3), 0.5, 2.5, 1.0, [0.3, 0.5])
        x = np.array([d.states[1, 0] for d in sample_bridges(spec, random_state=2, size=4000)])
        assert stats.kstest(x, marginal_cdf(spec, 0.5)).statistic < 0.03

    def test_reproducible(self):
        spec = BridgeSpec(DiffusionModel(VonMises(0.0, 2.0), 0.3), 0.5, 2.5, 1.0, [0.5])
        assert np.array_equal(sample_bridge(spec, 5).states, sample_bridge(spec, 5).states)

    @pytest.mark.parametrize("times", [[0.0], [1.0], [0.6, 0.4], [1.5]])
    def test_bad_times(self, times):
        with pytest.raises(DomainError):
            BridgeSpec(DiffusionModel(Uniform(), 1.0), 0.0, 1.0, 1.0, times)


class TestMarginalDensity:
    def test_normalised(self):
        spec = BridgeSpec(DiffusionModel(WrappedCauchy(2.0, 0.5), 0.4), 0.5, 4.5, 2.0, [1.0])
        for t in (0.1, 1.0, 1.9):
            val, _ = integrate.quad(lambda x: float(bridge_marginal_density(spec, t, x)), 0, TWO_PI, limit=400,
                                    epsabs=1e-12)
            assert abs(val - 1) < 1e-6

    def test_concentrates_at_start(self):
        spec = BridgeSpec(DiffusionModel(VonMises(0.0, 2.0), 0.25), 1.0, 3.0, 1.0, [0.5])
        val, _ = integrate.quad(lambda x: float(bridge_marginal_density(spec, 1e-5, x)), 0.9, 1.1, points=[1.0])
        assert val > 1 - 1e-8

    def test_uniform_direct_construction(self):
        sigma, T, t, a, b = 0.5, 1.5, 0.6, 0.4, 5.0
        spec = BridgeSpec(DiffusionModel(Uniform(), sigma), a, b, T, [t])
        tab = winding_distribution(spec)
        x = np.linspace(0, TWO_PI, 50)
        var = (TWO_PI * sigma) ** 2 * t * (T - t) / T
        direct = sum(p * wrapped_normal_pdf(x, a + TWO_PI * t / T * ((b - a) / TWO_PI + k), var)
                     for k, p in zip(tab.ks[:, 0], tab.probs))
        assert_allclose(bridge_marginal_density(spec, t, x), direct, rtol=1e-10)

    def test_time_reversal(self):
        model = DiffusionModel(VonMises(1.0, 1.5), 0.3)
        fwd = BridgeSpec(model, 0.5, 2.5, 1.0, [0.5])
        bwd = BridgeSpec(model, 2.5, 0.5, 1.0, [0.5])
        x = np.linspace(0, TWO_PI, 25)
        assert_allclose(bridge_marginal_density(fwd, 0.3, x), bridge_marginal_density(bwd, 0.7, x), rtol=1e-10)

    def test_outside_interval(self):
        spec = BridgeSpec(DiffusionModel(Uniform(), 1.0), 0.0, 1.0, 1.0, [0.5])
        with pytest.raises(DomainError):
            bridge_marginal_density(spec, 1.0, 0.5)
