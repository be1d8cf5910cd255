import math

import numpy as np
import pytest

import bufrelay.closed_form as cf
from bufrelay.channel import rayleigh
from bufrelay.policies import PolicySpec, identity, log_capacity
from bufrelay.simulator import SimConfig, run
from bufrelay.solvers import (
    solve_conv_pa_level,
    solve_lambda_rho,
    solve_rho_for_delay,
    solve_rho_for_load,
    solve_rho_opt,
    tau_conv2_pa_rayleigh,
)
from bufrelay.special_functions import ConvergenceError


class TestSolveRhoOpt:
    def test_symmetric_unity(self):
        for om in (0.5, 1.0, 4.0):
            for f in (identity(), log_capacity()):
                res = solve_rho_opt(f, rayleigh(om), rayleigh(om))
                assert res.rho == pytest.approx(1.0, abs=1e-6)
                assert res.converged

    def test_monte_carlo_grid_argmax(self):
        # stable throughput maximized at the analytic threshold
        ms, mr = rayleigh(1.0), rayleigh(2.0)
        res = solve_rho_opt(identity(), ms, mr)
        grid = res.rho * np.array([0.4, 0.6, 0.8, 1.0, 1.25, 1.67, 2.5])
        taus = []
        for rho in grid:
            policy = PolicySpec("adaptive_fixed", rho=float(rho), decision_fn=identity())
            m = run(SimConfig(policy=policy, model_s=ms, model_r=mr,
                              slots=200_000, seed=5, warmup_slots=10_000))
            # the stable rate is capped by both sides of the queue
            taus.append(min(m.throughput, m.arrival_rate))
        best = grid[int(np.argmax(taus))]
        assert abs(math.log(best / res.rho)) <= math.log(1.3) + 1e-9

    def test_rho_opt_vanishes_with_weak_relay(self):
        res = solve_rho_opt(identity(), rayleigh(1.0), rayleigh(0.01))
        assert res.rho < 1e-3

    def test_residual_monotone_on_bracket(self):
        ms, mr = rayleigh(1.0), rayleigh(2.0)
        rhos = np.logspace(-2, 2, 9)
        vals = [cf.threshold_residual(identity(), float(r), ms, mr) for r in rhos]
        assert all(a < b for a, b in zip(vals, vals[1:]))

    def test_deterministic(self):
        a = solve_rho_opt(log_capacity(), rayleigh(1.0), rayleigh(3.0))
        b = solve_rho_opt(log_capacity(), rayleigh(1.0), rayleigh(3.0))
        assert a.rho == b.rho and a.tau == b.tau


class TestSolveLambdaRho:
    def test_root_quality(self):
        res = solve_lambda_rho(rayleigh(0.5), rayleigh(1.5), 2.0)
        assert res.converged
        assert all(abs(r) < 1e-6 for r in res.residuals)
        assert res.lam > 0.0 and res.rho > 0.0

    def test_nested_agrees_with_grid(self):
        for om_s, om_r, gamma in [(0.5, 1.5, 2.0), (1.0, 1.0, 1.0)]:
            nested = solve_lambda_rho(rayleigh(om_s), rayleigh(om_r), gamma)
            grid = solve_lambda_rho(rayleigh(om_s), rayleigh(om_r), gamma, method="grid")
            assert nested.tau == pytest.approx(grid.tau, rel=1e-4)

    def test_validation(self):
        with pytest.raises(ValueError):
            solve_lambda_rho(rayleigh(1.0), rayleigh(1.0), 0.0)
        with pytest.raises(ValueError):
            solve_lambda_rho(rayleigh(1.0), rayleigh(1.0), 1.0, method="newton")


class TestSolveRhoForDelay:
    def test_bound_met_and_monotone(self):
        taus, rhos = [], []
        for target in (4.0, 8.0, 20.0):
            res = solve_rho_for_delay(target, 1.0, 1.0)
            assert res.converged
            m = cf.delay_moments(res.rho, 1.0, 1.0)
            assert cf.delay_upper_bound(m) == pytest.approx(target, rel=1e-6)
            taus.append(res.tau)
            rhos.append(res.rho)
        assert taus[0] < taus[1] < taus[2]
        assert rhos[0] < rhos[1] < rhos[2]

    def test_approaches_optimum_for_loose_targets(self):
        opt = solve_rho_opt(identity(), rayleigh(1.0), rayleigh(1.0))
        res = solve_rho_for_delay(5000.0, 1.0, 1.0)
        assert res.rho < opt.rho
        assert res.rho == pytest.approx(opt.rho, rel=0.05)

    def test_simulated_delay_within_target(self):
        target = 12.0
        res = solve_rho_for_delay(target, 1.0, 1.0)
        policy = PolicySpec("starved", rho=res.rho, decision_fn=identity())
        m = run(SimConfig(policy=policy, model_s=rayleigh(1.0), model_r=rayleigh(1.0),
                          slots=400_000, seed=2024, warmup_slots=20_000))
        assert m.mean_delay_fifo <= target

    def test_infeasible_target(self):
        with pytest.raises(ValueError, match="below the minimum"):
            solve_rho_for_delay(1.0, 1.0, 1.0)


class TestSolveRhoForLoad:
    def test_hits_target(self):
        for xi in (0.5, 0.9):
            rho = solve_rho_for_load(xi, 1.0, 1.0)
            assert cf.delay_moments(rho, 1.0, 1.0).xi == pytest.approx(xi, abs=1e-9)

    def test_validation(self):
        with pytest.raises(ValueError):
            solve_rho_for_load(1.0, 1.0, 1.0)


class TestConvPaSolver:
    def test_budget_met(self):
        alpha = solve_conv_pa_level(1.9, 1.0)
        assert cf.conv_pa_power_mean(alpha, 1.9) == pytest.approx(1.0, rel=1e-10)

    def test_tau_positive_and_bounded(self):
        tau = tau_conv2_pa_rayleigh(0.1, 1.9, 1.0)
        assert 0.0 < tau < 1.0
        # power helps: beats the fixed-power conventional throughput
        assert tau >= cf.tau_conv2_rayleigh(0.1, 1.9)
