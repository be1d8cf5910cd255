import math

import numpy as np
import pytest
from scipy import stats

from bufrelay.channel import FadingModel, LinkSnapshot, custom, pdf_at, rayleigh, sample
from bufrelay.special_functions import QuadratureSpec, integrate_semi_infinite


class TestConstruction:
    def test_mean_must_be_positive(self):
        with pytest.raises(ValueError):
            rayleigh(0.0)
        with pytest.raises(ValueError):
            rayleigh(-2.0)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            FadingModel(kind="rician", mean=1.0)

    def test_custom_needs_callbacks(self):
        with pytest.raises(ValueError):
            FadingModel(kind="custom", mean=1.0)

    def test_custom_unnormalized_pdf_rejected(self):
        bad_pdf = lambda x: 2.0 * math.exp(-x)  # integrates to 2
        sampler = lambda rng, n: rng.exponential(1.0, n)
        with pytest.raises(ValueError, match="integrates"):
            custom(1.0, bad_pdf, sampler)

    def test_custom_roundtrip(self):
        model = custom(
            2.0,
            lambda x: math.exp(-x / 2.0) / 2.0,
            lambda rng, n: rng.exponential(2.0, n),
        )
        assert pdf_at(model, 0.0) == pytest.approx(0.5)
        draws = sample(model, np.random.default_rng(3), 200_000)
        assert np.mean(draws) == pytest.approx(2.0, abs=0.02)

    def test_snapshot_nonnegative(self):
        with pytest.raises(ValueError):
            LinkSnapshot(s=-0.1, r=1.0)


class TestSampling:
    def test_law_of_large_numbers(self):
        draws = sample(rayleigh(1.0), np.random.default_rng(11), 1_000_000)
        assert np.mean(draws) == pytest.approx(1.0, abs=0.01)

    def test_tail_fraction(self):
        draws = sample(rayleigh(2.0), np.random.default_rng(12), 1_000_000)
        assert np.mean(draws > 2.0) == pytest.approx(math.exp(-1.0), abs=0.005)

    def test_deterministic_per_seed(self):
        a = sample(rayleigh(1.0), np.random.default_rng(99), 1000)
        b = sample(rayleigh(1.0), np.random.default_rng(99), 1000)
        assert np.array_equal(a, b)

    def test_scalar_draw(self):
        v = sample(rayleigh(1.0), np.random.default_rng(1))
        assert isinstance(v, float) and v >= 0.0

    def test_kolmogorov_smirnov(self):
        n = 100_000
        draws = sample(rayleigh(1.5), np.random.default_rng(21), n)
        stat = stats.kstest(draws, stats.expon(scale=1.5).cdf).statistic
        critical_1pct = 1.63 / math.sqrt(n)
        assert stat < critical_1pct


class TestPdf:
    def test_values(self):
        assert pdf_at(rayleigh(1.0), 0.0) == pytest.approx(1.0)
        assert pdf_at(rayleigh(2.0), 2.0) == pytest.approx(math.exp(-1.0) / 2.0)

    def test_domain_error(self):
        with pytest.raises(ValueError):
            pdf_at(rayleigh(1.0), -0.5)

    @pytest.mark.parametrize("mean", [0.1, 1.0, 7.5])
    def test_pdf_normalized(self, mean):
        model = rayleigh(mean)
        mass = integrate_semi_infinite(
            lambda x: pdf_at(model, x), 0.0,
            QuadratureSpec(1e-11, 1e-11, 8000), scale=mean,
        )
        assert mass == pytest.approx(1.0, abs=1e-9)
