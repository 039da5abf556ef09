import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import simpson
from scipy.stats import chisquare

from fogsim.medium import (
    DomainError,
    FogTier,
    Medium,
    PassThrough,
    Scatter,
    hg_cos_cdf,
    hg_phase,
    mor_from_sigma,
    sample_distance,
    sample_hg,
    sample_hg_cos,
    sigma_from_mor,
    sigma_from_power,
    standard_tiers,
    transmittance,
)

# (1/4pi)(1-g^2)/(1-g)^3 at g=0.87, computed with 30-digit arithmetic
HG_FORWARD_087 = 8.8053178574510141
FOUR_PI = 4.0 * math.pi


class TestHgPhase:
    def test_isotropic_value(self):
        assert hg_phase(0.5, 0.0) == pytest.approx(1.0 / FOUR_PI, rel=1e-12)
        # independent of angle at g=0
        assert hg_phase(-0.9, 0.0) == hg_phase(0.9, 0.0)

    def test_forward_peak_value(self):
        assert hg_phase(1.0, 0.87) == pytest.approx(HG_FORWARD_087, rel=1e-12)

    def test_forward_peak_is_max(self):
        c = np.linspace(-1, 1, 2001)
        v = hg_phase(c, 0.87)
        assert v.argmax() == 2000
        assert np.all(v > 0)

    @pytest.mark.parametrize("g", [-0.9, -0.5, 0.0, 0.5, 0.87])
    def test_normalization(self, g):
        mu = np.linspace(-1.0, 1.0, 1_000_001)
        integral = 2.0 * math.pi * simpson(hg_phase(mu, g), x=mu)
        assert integral == pytest.approx(1.0, abs=1e-6)

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            hg_phase(1.1, 0.5)
        with pytest.raises(DomainError):
            hg_phase(0.5, 1.0)
        # within the 1e-12 slack
        hg_phase(1.0 + 5e-13, 0.5)


class TestSampleHg:
    def test_isotropic_midpoint(self):
        d, pdf = sample_hg(0.0, 0.5, 0.0, np.array([0.0, 0.0, 1.0]))
        # cos theta = 1 - 2 u1 = 0
        assert np.dot(d, [0, 0, 1]) == pytest.approx(0.0, abs=1e-12)
        assert pdf == pytest.approx(1.0 / FOUR_PI, rel=1e-12)

    def test_unit_length_and_pdf(self):
        rng = np.random.default_rng(3)
        w = np.array([0.6, -0.64, 0.48]) / math.sqrt(0.6**2 + 0.64**2 + 0.48**2)
        for _ in range(200):
            u1, u2 = rng.random(2)
            d, pdf = sample_hg(0.87, u1, u2, w)
            assert np.linalg.norm(d) == pytest.approx(1.0, abs=1e-12)
            assert pdf == pytest.approx(hg_phase(float(np.dot(d, w)), 0.87), rel=1e-9)

    @staticmethod
    def _sample_cos_vec(g, u):
        s = (1.0 - g * g) / (1.0 - g + 2.0 * g * u)
        return (1.0 + g * g - s * s) / (2.0 * g)

    def test_scalar_matches_vectorized_inverse(self):
        rng = np.random.default_rng(1)
        u = rng.random(1000)
        vec = self._sample_cos_vec(0.87, u)
        for ui, ci in zip(u, vec):
            assert sample_hg_cos(0.87, float(ui)) == pytest.approx(ci, abs=1e-14)

    def test_mean_cosine_equals_g(self):
        n = 1_000_000
        g = 0.87
        rng = np.random.default_rng(7)
        cos = self._sample_cos_vec(g, rng.random(n))
        sem = cos.std() / math.sqrt(n)
        assert cos.mean() == pytest.approx(g, abs=max(3 * sem, 1e-4))
        assert abs(cos.mean() - g) < 0.003

    def test_chi_square_against_cdf(self):
        n = 1_000_000
        g = 0.87
        rng = np.random.default_rng(11)
        cos = self._sample_cos_vec(g, rng.random(n))
        edges = np.linspace(-1.0, 1.0, 65)
        observed, _ = np.histogram(cos, bins=edges)
        expected = np.diff(hg_cos_cdf(edges, g)) * n
        stat, p = chisquare(observed, expected * (observed.sum() / expected.sum()))
        assert p > 0.01

    def test_degenerate_small_g_uniform(self):
        d, pdf = sample_hg(1e-6, 0.25, 0.5, np.array([0.0, 0.0, 1.0]))
        assert np.dot(d, [0, 0, 1]) == pytest.approx(0.5, abs=1e-9)


class TestTransmittance:
    def test_examples(self):
        assert transmittance(0.02, 150.0) == pytest.approx(math.exp(-3.0), rel=1e-12)
        assert transmittance(123.0, 0.0) == 1.0
        assert transmittance(0.0, 1e6) == 1.0

    @given(st.floats(1e-6, 1.0), st.floats(0.0, 500.0), st.floats(0.0, 500.0))
    def test_multiplicative(self, sigma, a, b):
        lhs = transmittance(sigma, a) * transmittance(sigma, b)
        assert lhs == pytest.approx(transmittance(sigma, a + b), abs=1e-12)


class TestSampleDistance:
    def test_vacuum(self):
        ev = sample_distance(0.0, 0.999, 10.0)
        assert isinstance(ev, PassThrough) and ev.prob == 1.0

    def test_analytic_inverse_cdf(self):
        ev = sample_distance(0.01, 0.5, 1e9)
        assert isinstance(ev, Scatter)
        assert ev.t == pytest.approx(69.31471805599453, rel=1e-12)
        assert ev.pdf == pytest.approx(0.005, rel=1e-12)

    def test_empirical_scatter_fraction(self):
        n = 1_000_000
        rng = np.random.default_rng(5)
        u = rng.random(n)
        scatters = np.count_nonzero(-np.log1p(-u) / 0.02 < 150.0)
        frac = scatters / n
        expect = 1.0 - math.exp(-3.0)
        sem = math.sqrt(expect * (1 - expect) / n)
        assert frac == pytest.approx(expect, abs=max(3 * sem, 1e-3))

    def test_consistent_with_transmittance(self):
        # P(scatter) == 1 - T(sigma, d) by construction of the inverse CDF
        for sigma, d in [(0.005, 100.0), (0.05, 10.0)]:
            u_crit = 1.0 - transmittance(sigma, d)
            assert isinstance(sample_distance(sigma, u_crit - 1e-9, d), Scatter)
            assert isinstance(sample_distance(sigma, u_crit + 1e-9, d), PassThrough)


class TestMorChamber:
    @pytest.mark.parametrize("sigma,mor", [(0.005, 599.2), (0.01, 299.6), (0.02, 149.8)])
    def test_paper_tiers(self, sigma, mor):
        assert mor_from_sigma(sigma) == pytest.approx(mor, rel=1e-12)

    @given(st.floats(1.0, 10_000.0))
    def test_round_trip(self, mor):
        assert mor_from_sigma(sigma_from_mor(mor)) == pytest.approx(mor, rel=1e-12)

    def test_round_trip_300(self):
        assert mor_from_sigma(sigma_from_mor(300.0)) == pytest.approx(300.0, abs=1e-9)

    def test_domain(self):
        for bad in (0.0, -1.0):
            with pytest.raises(DomainError):
                mor_from_sigma(bad)
            with pytest.raises(DomainError):
                sigma_from_mor(bad)

    def test_sigma_from_power_examples(self):
        assert sigma_from_power(1.0, 1.0, 1.5) == 0.0
        assert sigma_from_power(1.0, math.exp(-0.03), 1.5) == pytest.approx(0.02, rel=1e-12)
        assert sigma_from_power(2.0, 1.0, 1.0) == pytest.approx(math.log(2), rel=1e-12)

    def test_sigma_from_power_domain(self):
        with pytest.raises(DomainError):
            sigma_from_power(1.0, 1.1, 1.0)  # pu > p0
        with pytest.raises(DomainError):
            sigma_from_power(0.0, 1.0, 1.0)
        with pytest.raises(DomainError):
            sigma_from_power(1.0, 1.0, 0.0)

    @given(st.floats(1e-4, 1.0), st.floats(0.1, 100.0))
    def test_power_closed_loop(self, sigma, u):
        pu = 1.0 * transmittance(sigma, u)
        assert sigma_from_power(1.0, pu, u) == pytest.approx(sigma, abs=1e-9, rel=1e-9)


class TestTypes:
    def test_medium_invariants(self):
        m = Medium(0.01, 0.002, 0.87)
        assert m.sigma_t == pytest.approx(0.012)
        with pytest.raises(DomainError):
            Medium(-0.1, 0.0)
        with pytest.raises(DomainError):
            Medium(0.1, 0.0, g=1.0)

    def test_fog_tiers(self):
        tiers = standard_tiers()
        assert [t.name for t in tiers] == ["heavy", "thick", "dense"]
        assert [t.sigma_s for t in tiers] == [0.005, 0.01, 0.02]
        for t in tiers:
            assert t.visibility_m == pytest.approx(2.996 / t.sigma_s, rel=1e-12)
        assert FogTier.from_sigma(0.004).name == "custom"
        with pytest.raises(DomainError):
            FogTier("heavy", 0.005, 600.0)  # inconsistent visibility
