import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bufrelay.special_functions import (
    ConvergenceError,
    QuadratureSpec,
    exp_e1_scaled,
    exp_integral_e1,
    integrate_semi_infinite,
    lambert_w,
)
from bufrelay.special_functions import _e1_cf_scaled, _e1_series

mp.mp.dps = 30

# frozen with the dual-method oracle (series vs continued fraction) and
# confirmed against 30-digit arithmetic
E1_AT_1 = 0.21938393439552027
E1_AT_10 = 4.156968929685324e-06


class TestExpIntegral:
    def test_diverges_at_zero(self):
        assert exp_integral_e1(1e-12) > 25.0
        assert exp_integral_e1(1e-14) > exp_integral_e1(1e-12)

    def test_known_values(self):
        assert exp_integral_e1(1.0) == pytest.approx(E1_AT_1, rel=1e-12)
        assert exp_integral_e1(10.0) == pytest.approx(E1_AT_10, rel=1e-12)

    def test_domain_error(self):
        with pytest.raises(ValueError):
            exp_integral_e1(0.0)
        with pytest.raises(ValueError):
            exp_integral_e1(-1.0)

    def test_underflows_to_zero(self):
        assert exp_integral_e1(1e4) == 0.0

    @pytest.mark.parametrize("x", [1e-8, 1e-4, 0.03, 0.4, 0.999, 1.0, 2.5, 7.0,
                                   31.0, 120.0, 700.0])
    def test_relative_error_against_high_precision(self, x):
        ref = float(mp.e1(x))
        assert exp_integral_e1(x) == pytest.approx(ref, rel=1e-12)

    def test_dual_method_agreement(self):
        # series and continued fraction overlap around the split point
        for x in np.linspace(0.7, 2.5, 40):
            series = _e1_series(float(x))
            cf = math.exp(-x) * _e1_cf_scaled(float(x))
            assert abs(series - cf) / series < 1e-12

    def test_scaled_form_no_overflow(self):
        for x in (1.0, 100.0, 1000.0, 5000.0):
            ref = float(mp.exp(x) * mp.e1(x))
            assert exp_e1_scaled(x) == pytest.approx(ref, rel=1e-12)

    def test_recurrence_by_quadrature(self):
        # E1(x) = e^-x / x - integral of e^-t / t^2 over [x, inf)
        rng = np.random.default_rng(5)
        spec = QuadratureSpec(1e-12, 1e-12, 8000)
        for x in rng.uniform(0.1, 20.0, 12):
            x = float(x)
            tail = integrate_semi_infinite(
                lambda t: math.exp(-t) / (t * t), x, spec, scale=1.0
            )
            assert exp_integral_e1(x) == pytest.approx(
                math.exp(-x) / x - tail, abs=1e-11
            )


class TestLambertW:
    def test_trivial_points(self):
        assert lambert_w("principal", 0.0) == 0.0
        assert lambert_w("principal", -math.exp(-1.0)) == -1.0
        assert lambert_w("lower", -math.exp(-1.0)) == -1.0

    def test_lower_branch_value(self):
        assert lambert_w("lower", -0.1) == pytest.approx(-3.5771520639572971, rel=1e-12)

    def test_branch_ranges(self):
        assert lambert_w("principal", -0.2) >= -1.0
        assert lambert_w("lower", -0.2) <= -1.0

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            lambert_w("principal", -0.5)
        with pytest.raises(ValueError):
            lambert_w("lower", 0.1)
        with pytest.raises(ValueError):
            lambert_w("lower", -1.0)
        with pytest.raises(ValueError):
            lambert_w("middle", 0.1)

    @given(st.floats(min_value=-0.3678794411714423, max_value=1e6,
                     allow_nan=False, allow_infinity=False))
    @settings(max_examples=300)
    def test_principal_identity(self, x):
        w = lambert_w("principal", x)
        assert w * math.exp(w) == pytest.approx(x, rel=1e-12, abs=1e-300)

    @given(st.floats(min_value=-0.3678794411714423, max_value=-1e-12,
                     allow_nan=False, allow_infinity=False))
    @settings(max_examples=300)
    def test_lower_identity(self, x):
        w = lambert_w("lower", x)
        assert w <= -1.0 + 1e-12
        assert w * math.exp(w) == pytest.approx(x, rel=1e-12)


class TestQuadrature:
    def test_spec_validation(self):
        with pytest.raises(ValueError):
            QuadratureSpec(abs_tol=0.0)
        with pytest.raises(ValueError):
            QuadratureSpec(rel_tol=-1.0)
        with pytest.raises(ValueError):
            QuadratureSpec(max_subdivisions=0)

    def test_exponential(self):
        v = integrate_semi_infinite(lambda x: math.exp(-x), 0.0)
        assert v == pytest.approx(1.0, abs=1e-9)

    def test_matches_e1(self):
        v = integrate_semi_infinite(lambda x: math.exp(-x) / x, 1.0)
        assert v == pytest.approx(E1_AT_1, abs=1e-9)

    def test_gamma_two(self):
        v = integrate_semi_infinite(lambda x: x * math.exp(-x), 0.0)
        assert v == pytest.approx(1.0, abs=1e-9)

    def test_scale_hint(self):
        v = integrate_semi_infinite(lambda x: math.exp(-x / 500.0), 0.0, scale=500.0)
        assert v == pytest.approx(500.0, rel=1e-9)

    def test_deterministic(self):
        f = lambda x: math.exp(-x) * math.sin(x) ** 2
        a = integrate_semi_infinite(f, 0.0)
        b = integrate_semi_infinite(f, 0.0)
        assert a == b  # bit identical

    def test_exhaustion_raises(self):
        spec = QuadratureSpec(1e-14, 1e-14, 2)
        with pytest.raises(ConvergenceError):
            integrate_semi_infinite(
                lambda x: math.exp(-x / 7.0) * math.sin(3.0 * x) ** 2, 0.0, spec
            )

    def test_shifted_lower_limit(self):
        v = integrate_semi_infinite(lambda x: math.exp(-(x - 3.0)), 3.0)
        assert v == pytest.approx(1.0, abs=1e-9)
