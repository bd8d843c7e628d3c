import numpy as np
import pytest
from scipy.integrate import quad

from langinc import GibbsDensity, PiecewisePotential1D, normalizer

from conftest import CLOSED_FORM_Z


def abs_potential():
    return PiecewisePotential1D([0.0], [[0.0, -1.0], [0.0, 1.0]])


class TestNormalizer:
    def test_builtin_closed_form(self, example):
        z = normalizer(example, 1.0, (-40.0, 40.0))
        assert abs(z - CLOSED_FORM_Z) <= 1e-9 * CLOSED_FORM_Z

    def test_gaussian_integral(self):
        p = PiecewisePotential1D([], [[0.0, 0.0, 1.0]])  # f = x^2
        z = normalizer(p, 1.0, (-40.0, 40.0))
        assert z == pytest.approx(np.sqrt(np.pi), rel=1e-9)

    def test_sigma_scaling_for_abs(self):
        # Z = 2 sigma for f = |x|, so doubling sigma doubles Z
        p = abs_potential()
        z1 = normalizer(p, 1.0, (-60.0, 60.0))
        z2 = normalizer(p, 2.0, (-60.0, 60.0))
        assert z1 == pytest.approx(2.0, rel=1e-9)
        assert z2 == pytest.approx(2.0 * z1, rel=1e-9)

    def test_quadrature_oracle(self, example):
        # independent route: scipy quad piece by piece plus exact tails
        segs = [-40.0, -1.0, 0.0, 1.0, 40.0]
        z_quad = sum(
            quad(lambda x: np.exp(-example.value(x)), a, b, limit=200)[0]
            for a, b in zip(segs[:-1], segs[1:])
        )
        z_quad += 2 * np.exp(-example.value(40.0))
        assert normalizer(example, 1.0, (-40.0, 40.0)) == pytest.approx(z_quad, rel=1e-9)


class TestDensity:
    def test_pdf_values(self, gibbs_example):
        assert gibbs_example.pdf(1.0) == pytest.approx(1.0 / CLOSED_FORM_Z, rel=1e-10)
        assert gibbs_example.pdf(0.0) == pytest.approx(np.exp(-1) / CLOSED_FORM_Z, rel=1e-10)
        assert gibbs_example.pdf(1.0) == pytest.approx(0.30635, abs=1e-5)
        assert gibbs_example.pdf(0.0) == pytest.approx(0.11270, abs=1e-5)

    def test_pdf_integrates_to_one(self, example, gibbs_example):
        segs = [-40.0, -1.0, 0.0, 1.0, 40.0]
        total = sum(
            quad(gibbs_example.pdf, a, b, limit=200)[0] for a, b in zip(segs[:-1], segs[1:])
        )
        assert abs(total - 1.0) <= 1e-8

    def test_pdf_maximized_at_minimizers(self, gibbs_example):
        xs = np.linspace(-40, 40, 20001)
        pdf = gibbs_example.pdf(xs)
        peak = np.max(pdf)
        assert gibbs_example.pdf(1.0) == pytest.approx(peak, rel=1e-6)
        assert gibbs_example.pdf(-1.0) == pytest.approx(peak, rel=1e-6)

    def test_constant_shift_invariance(self, example, gibbs_example):
        shifted = PiecewisePotential1D(example.breakpoints, example.pieces + np.array([3.0, 0, 0, 0]))
        g2 = GibbsDensity(shifted, 1.0, (-40.0, 40.0))
        xs = np.linspace(-5, 5, 101)
        assert g2.pdf(xs) == pytest.approx(gibbs_example.pdf(xs), rel=1e-12)

    def test_domain_must_cover_breakpoints(self, example):
        with pytest.raises(ValueError, match="contain"):
            GibbsDensity(example, 1.0, (-0.5, 40.0))

    def test_small_domain_tail_mass_rejected(self, example):
        with pytest.raises(ValueError, match="tail"):
            GibbsDensity(example, 1.0, (-8.0, 8.0))


class TestCdfQuantile:
    def test_cdf_endpoints(self, gibbs_example):
        a, b = gibbs_example.domain
        assert gibbs_example.cdf(a) == 0.0
        assert gibbs_example.cdf(b) == 1.0

    def test_cdf_strictly_increasing(self, gibbs_example):
        xs = np.linspace(-6, 6, 4001)
        assert np.all(np.diff(gibbs_example.cdf(xs)) > 0)

    def test_inverse_identity(self, gibbs_example):
        for u in (0.1, 0.5, 0.9):
            assert gibbs_example.cdf(gibbs_example.quantile(u)) == pytest.approx(u, abs=1e-10)

    def test_quantile_cdf_roundtrip_away_from_tails(self, gibbs_example):
        xs = np.linspace(-5, 5, 101)
        assert gibbs_example.quantile(gibbs_example.cdf(xs)) == pytest.approx(xs, abs=1e-9)

    def test_median_is_zero(self, gibbs_example):
        assert abs(gibbs_example.quantile(0.5)) <= 1e-12

    def test_quantile_domain_errors(self, gibbs_example):
        for u in (0.0, 1.0, -0.2, 1.3):
            with pytest.raises(ValueError):
                gibbs_example.quantile(u)


class TestIidSampling:
    def test_deterministic(self, gibbs_example):
        a = gibbs_example.iid_sample(1000, seed=42)
        b = gibbs_example.iid_sample(1000, seed=42)
        assert np.array_equal(a, b)

    def test_mean_of_symmetric_law(self, gibbs_example):
        s = gibbs_example.iid_sample(1_000_000, seed=7)
        assert abs(np.mean(s)) <= 0.005

    def test_two_seed_noise_floor(self, gibbs_example):
        from langinc.metrics import w1_samples

        a = gibbs_example.iid_sample(1_000_000, seed=1)
        b = gibbs_example.iid_sample(1_000_000, seed=2)
        assert w1_samples(a, b) <= 0.01

    def test_needs_positive_n(self, gibbs_example):
        with pytest.raises(ValueError):
            gibbs_example.iid_sample(0, seed=0)


def test_cdf_integral_is_antiderivative(gibbs_example):
    xs = np.linspace(-6.0, 6.0, 41)
    h = 1e-5
    fd = (gibbs_example.cdf_integral(xs + h) - gibbs_example.cdf_integral(xs - h)) / (2 * h)
    assert fd == pytest.approx(gibbs_example.cdf(xs), abs=1e-8)
