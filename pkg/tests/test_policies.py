import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bufrelay.policies import (
    DecisionFunction,
    PolicySpec,
    allocate_power,
    conventional_schedule,
    identity,
    l_thresholds,
    l1_threshold,
    l2_threshold,
    log_capacity,
    select_fixed_power,
    select_queue_limited,
    select_with_power,
)
from bufrelay.policies import _metric_relay, _metric_source


def bisect_crossing(metric, target, lo, hi_start=None):
    """Independent oracle: bisection on the metric-equality equation."""
    hi = hi_start or max(2.0 * lo, 1.0)
    while metric(hi) < target:
        hi *= 2.0
        if hi > 1e300:
            return math.inf
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if metric(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class TestDecisionFunctions:
    @given(st.floats(1e-6, 1e6))
    @settings(max_examples=200)
    def test_inverse_roundtrip(self, x):
        for f in (identity(), log_capacity()):
            assert float(f.inverse(f.forward(x))) == pytest.approx(x, rel=1e-10)

    def test_strictly_increasing(self):
        for f in (identity(), log_capacity()):
            xs = np.logspace(-6, 6, 50)
            ys = np.asarray(f.forward(xs))
            assert np.all(np.diff(ys) > 0)
            assert np.all(ys >= 0)


class TestSelectFixedPower:
    def test_relay_stronger(self):
        assert select_fixed_power(1.0, 2.0, 1.0, log_capacity()) == 1

    def test_tie_goes_to_relay(self):
        assert select_fixed_power(2.0, 1.0, 0.5, identity()) == 1

    def test_source_stronger(self):
        assert select_fixed_power(2.0, 1.0, 1.0, identity()) == 0
        assert select_fixed_power(2.0, 1.0, 1.0, log_capacity()) == 0

    @given(
        st.floats(0.0, 100.0),
        st.floats(0.0, 100.0),
        st.floats(0.01, 10.0),
        st.floats(0.0, 100.0),
    )
    @settings(max_examples=200)
    def test_monotone_in_r(self, s, r, rho, bump):
        f = log_capacity()
        if select_fixed_power(s, r, rho, f) == 1:
            assert select_fixed_power(s, r + bump, rho, f) == 1

    @given(st.floats(0.0, 50.0), st.floats(0.0, 50.0))
    @settings(max_examples=200)
    def test_rho_one_metric_free(self, s, r):
        # at threshold one, both metrics reduce to comparing r against s
        assert select_fixed_power(s, r, 1.0, identity()) == select_fixed_power(
            s, r, 1.0, log_capacity()
        )


class TestAllocatePower:
    def test_cutoff_boundary(self):
        lam, rho = 0.8, 2.0
        gs, gr = allocate_power(lam / rho, 5.0, lam, rho)
        assert gs == 0.0
        gs, gr = allocate_power(5.0, lam, lam, rho)
        assert gr == 0.0

    def test_strong_relay_asymptote(self):
        _, gr = allocate_power(1.0, 1e15, 0.5, 1.0)
        assert gr == pytest.approx(2.0, rel=1e-12)

    def test_hand_value(self):
        gs, gr = allocate_power(1.0, 1.0, 0.5, 1.0)
        assert gs == pytest.approx(1.0)
        assert gr == pytest.approx(1.0)

    @given(st.floats(0.01, 10.0), st.floats(0.01, 10.0))
    @settings(max_examples=100)
    def test_continuity_at_cutoffs(self, lam, rho):
        eps = 1e-10
        gs, _ = allocate_power(lam / rho * (1.0 + eps), 1.0, lam, rho)
        assert 0.0 <= gs < 1e-8
        _, gr = allocate_power(1.0, lam * (1.0 + eps), lam, rho)
        assert 0.0 <= gr < 1e-8


class TestSelectWithPower:
    def test_relay_only_above_cutoff(self):
        lam, rho = 0.5, 2.0
        assert select_with_power(lam / rho * 0.9, lam * 3.0, lam, rho) == 1

    def test_relay_below_cutoff(self):
        lam, rho = 0.5, 2.0
        assert select_with_power(10.0, lam * 0.9, lam, rho) == 0
        assert select_with_power(lam / rho * 0.5, lam * 0.5, lam, rho) == 0  # idle

    def test_flips_across_crossing(self):
        lam, rho = 0.5, 1.3
        h_r = 2.0
        l1 = l1_threshold(h_r, lam, rho)
        assert select_with_power(l1 * (1.0 - 1e-9), h_r, lam, rho) == 1
        assert select_with_power(l1 * (1.0 + 1e-9), h_r, lam, rho) == 0


class TestLThresholds:
    def test_boundary_values(self):
        lam, rho = 0.5, 1.3
        l1, l2 = l_thresholds(lam, lam / rho, lam, rho)
        assert l1 == pytest.approx(lam / rho, rel=1e-9)
        assert l2 == pytest.approx(lam, rel=1e-9)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            l1_threshold(0.4, 0.5, 1.0)
        with pytest.raises(ValueError):
            l2_threshold(0.4, 0.5, 1.0)
        with pytest.raises(ValueError):
            l1_threshold(1.0, -0.5, 1.0)

    def test_against_bisection_oracle(self):
        rng = np.random.default_rng(17)
        for _ in range(250):
            lam = rng.uniform(0.05, 2.0)
            rho = rng.uniform(0.1, 5.0)
            h_r = lam * rng.uniform(1.0 + 1e-6, 40.0)
            h_s = lam / rho * rng.uniform(1.0 + 1e-6, 40.0)
            l1, l2 = l_thresholds(h_r, h_s, lam, rho)
            b1 = bisect_crossing(
                lambda h: _metric_source(h, lam, rho), _metric_relay(h_r, lam), lam / rho
            )
            b2 = bisect_crossing(
                lambda h: _metric_relay(h, lam), _metric_source(h_s, lam, rho), lam
            )
            assert abs(l1 - b1) / b1 < 1e-9
            assert abs(l2 - b2) / b2 < 1e-9
            assert l1 >= lam / rho * (1.0 - 1e-12)
            assert l2 >= lam * (1.0 - 1e-12)

    def test_region_consistency(self):
        rng = np.random.default_rng(23)
        for _ in range(1000):
            lam = rng.uniform(0.05, 2.0)
            rho = rng.uniform(0.1, 5.0)
            h_r = lam * rng.uniform(1.0 + 1e-6, 30.0)
            h_s = lam / rho * rng.uniform(1.0 + 1e-6, 30.0)
            d = select_with_power(h_s, h_r, lam, rho)
            l1, l2 = l_thresholds(h_r, h_s, lam, rho)
            assert d == (1 if h_s < l1 else 0) == (1 if h_r > l2 else 0)


class TestQueueLimited:
    def test_delegates_with_room(self):
        f = identity()
        assert select_queue_limited(0.5, 2.0, 1.0, f, 0.0, math.inf) == 1
        assert select_queue_limited(2.0, 0.5, 1.0, f, 0.0, math.inf) == 0

    def test_forced_when_full(self):
        # potential source bits (2) exceed the headroom (1)
        assert select_queue_limited(3.0, 0.0, 1.0, identity(), 9.0, 10.0) == 1

    def test_delegates_when_bits_fit(self):
        # log2(1.9) < 1 bit of headroom, so the threshold rule decides
        assert select_queue_limited(0.9, 0.0, 1.0, identity(), 9.0, 10.0) == 0


class TestConventionalSchedule:
    def test_alternating(self):
        assert conventional_schedule("conv_no_buffer", 1, 100) == 0
        assert conventional_schedule("conv_no_buffer", 2, 100) == 1

    def test_two_phase(self):
        assert conventional_schedule("conv_buffer", 50, 100) == 0
        assert conventional_schedule("conv_buffer", 51, 100) == 1

    def test_odd_horizon_rejected(self):
        with pytest.raises(ValueError):
            conventional_schedule("conv_no_buffer", 1, 99)

    def test_slot_out_of_range(self):
        with pytest.raises(ValueError):
            conventional_schedule("conv_buffer", 0, 100)
        with pytest.raises(ValueError):
            conventional_schedule("conv_buffer", 101, 100)


class TestPolicySpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            PolicySpec("unknown_protocol")
        with pytest.raises(ValueError):
            PolicySpec("adaptive_fixed", rho=0.0)
        with pytest.raises(ValueError):
            PolicySpec("adaptive_fixed", q_max=-1.0)
        with pytest.raises(ValueError):
            PolicySpec("adaptive_pa", rho=1.0)  # missing lam / gamma_bar
        with pytest.raises(ValueError):
            PolicySpec("adaptive_pa", rho=1.0, lam=1.0, gamma_bar=-1.0)

    def test_valid_pa(self):
        spec = PolicySpec("adaptive_pa", rho=2.0, lam=0.5, gamma_bar=1.0)
        assert spec.lam == 0.5
