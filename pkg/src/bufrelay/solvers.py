"""Root finders on top of the closed-form residuals.

One-dimensional problems (optimal decision threshold, water level of the
conventional baseline, delay-targeted threshold) bracket the residual and
hand it to Brent's method. The joint (lambda, rho) problem nests two such
searches: for each trial rho the power budget pins lambda, then the rate
balance drives rho; a coarse-grid fallback covers surfaces where the
nested bracketing fails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from . import closed_form as cf
from .channel import FadingModel
from .policies import DecisionFunction, identity
from .special_functions import ConvergenceError, DEFAULT_QUAD, QuadratureSpec

__all__ = [
    "SolverResult",
    "solve_rho_opt",
    "solve_lambda_rho",
    "solve_rho_for_delay",
    "solve_rho_for_load",
    "solve_conv_pa_level",
    "tau_conv2_pa_rayleigh",
]

_RESIDUAL_TOL = 1e-7


@dataclass(frozen=True)
class SolverResult:
    rho: float
    tau: float
    residuals: tuple[float, ...]
    iterations: int
    converged: bool
    lam: Optional[float] = None


class _CountedFn:
    """Wraps a residual so the solver can report how often it was called."""

    def __init__(self, fn: Callable[[float], float]):
        self.fn = fn
        self.calls = 0

    def __call__(self, x: float) -> float:
        self.calls += 1
        return self.fn(x)


def _bracket(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    lo_limit: float,
    hi_limit: float,
    factor: float = 10.0,
) -> tuple[float, float, float, float]:
    """Expand [lo, hi] geometrically until f changes sign across it."""
    flo, fhi = f(lo), f(hi)
    while flo * fhi > 0.0:
        moved = False
        if flo * fhi > 0.0 and lo > lo_limit:
            lo = max(lo / factor, lo_limit)
            flo = f(lo)
            moved = True
        if flo * fhi > 0.0 and hi < hi_limit:
            hi = min(hi * factor, hi_limit)
            fhi = f(hi)
            moved = True
        if not moved:
            raise ConvergenceError(
                f"no sign change on [{lo_limit}, {hi_limit}] "
                f"(f({lo})={flo:.3e}, f({hi})={fhi:.3e})"
            )
    return lo, hi, flo, fhi


def solve_rho_opt(
    f: DecisionFunction,
    model_s: FadingModel,
    model_r: FadingModel,
    spec: QuadratureSpec = DEFAULT_QUAD,
) -> SolverResult:
    """Decision threshold balancing mean arrivals against departures.

    The balance residual is strictly increasing in rho, so a bracketed
    Brent search on [1e-6, 1e6] pins the root; the returned tau is the
    relay-side rate there, which is the maximal stable throughput.
    """
    resid = _CountedFn(lambda rho: cf.threshold_residual(f, rho, model_s, model_r, spec))
    lo, hi, _, _ = _bracket(resid, 0.01, 100.0, 1e-6, 1e6)
    rho = brentq(resid, lo, hi, xtol=1e-14, rtol=8.9e-16)
    r_at = cf.threshold_residual(f, rho, model_s, model_r, spec)
    tau = cf.tau_max(f, rho, model_s, model_r, spec)
    return SolverResult(
        rho=rho,
        tau=tau,
        residuals=(r_at,),
        iterations=resid.calls,
        converged=abs(r_at) < _RESIDUAL_TOL,
    )


def _lambda_for_rho(
    rho: float,
    model_hs: FadingModel,
    model_hr: FadingModel,
    gamma_bar: float,
    spec: QuadratureSpec,
    counter: list,
) -> float:
    def power_resid(lam: float) -> float:
        counter[0] += 1
        return cf.pa_residuals(lam, rho, model_hs, model_hr, gamma_bar, spec)[1]

    lo, hi, _, _ = _bracket(power_resid, 1e-4, 1e2, 1e-9, 1e9)
    return brentq(power_resid, lo, hi, xtol=1e-13, rtol=8.9e-16)


def solve_lambda_rho(
    model_hs: FadingModel,
    model_hr: FadingModel,
    gamma_bar: float,
    spec: QuadratureSpec = DEFAULT_QUAD,
    method: str = "nested",
) -> SolverResult:
    """Joint water-filling level and decision threshold for a power budget.

    method "nested": for each trial rho solve the power budget for lambda,
    then drive the rate balance to zero in rho. method "grid": scan a
    log-spaced rho grid for the rate-balance sign change and bisect inside
    it; used automatically when the nested bracketing fails.
    """
    if not gamma_bar > 0.0:
        raise ValueError(f"gamma_bar must be positive, got {gamma_bar}")
    calls = [0]

    def rate_at(rho: float) -> float:
        lam = _lambda_for_rho(rho, model_hs, model_hr, gamma_bar, spec, calls)
        return cf.pa_residuals(lam, rho, model_hs, model_hr, gamma_bar, spec)[0]

    if method == "nested":
        try:
            lo, hi, _, _ = _bracket(rate_at, 0.01, 100.0, 1e-6, 1e6)
        except ConvergenceError:
            method = "grid"
        else:
            rho = brentq(rate_at, lo, hi, xtol=1e-12, rtol=8.9e-16)
    if method == "grid":
        grid = np.logspace(-3, 3, 61)
        vals = [rate_at(g) for g in grid]
        for i in range(len(grid) - 1):
            if vals[i] == 0.0 or vals[i] * vals[i + 1] < 0.0:
                rho = brentq(rate_at, grid[i], grid[i + 1], xtol=1e-12, rtol=8.9e-16)
                break
        else:
            raise ConvergenceError("rate balance has no root on the rho grid")
    elif method != "nested":
        raise ValueError(f"unknown method {method!r}")

    lam = _lambda_for_rho(rho, model_hs, model_hr, gamma_bar, spec, calls)
    rate_r, power_r, tau = cf.pa_residuals(lam, rho, model_hs, model_hr, gamma_bar, spec)
    return SolverResult(
        rho=rho,
        lam=lam,
        tau=tau,
        residuals=(rate_r, power_r),
        iterations=calls[0],
        converged=abs(rate_r) < _RESIDUAL_TOL and abs(power_r) < _RESIDUAL_TOL,
    )


def solve_rho_for_delay(
    target_delay: float,
    omega_s: float,
    omega_r: float,
    spec: QuadratureSpec = DEFAULT_QUAD,
) -> SolverResult:
    """Threshold below optimum whose delay bound meets the target.

    Starving the buffer trades throughput for delay: the bound grows
    monotonically with rho and diverges at the balance point, so any
    target above the small-rho floor has a unique solution. Throughput
    equals the arrival rate in this regime. Raises if the target is below
    the floor.
    """
    if not target_delay > 0.0:
        raise ValueError(f"target delay must be positive, got {target_delay}")
    opt = solve_rho_opt(identity(), FadingModel("rayleigh", omega_s),
                        FadingModel("rayleigh", omega_r), spec)

    calls = [0]

    def gap(rho: float) -> float:
        calls[0] += 1
        return cf.delay_upper_bound(cf.delay_moments(rho, omega_s, omega_r, spec)) - target_delay

    lo = opt.rho * 1e-8
    hi = opt.rho * (1.0 - 1e-9)
    floor = gap(lo)
    if floor > 0.0:
        raise ValueError(
            f"target delay {target_delay} below the minimum achievable bound "
            f"{floor + target_delay:.6g} slots"
        )
    # near the balance point the bound diverges; back off until finite & above
    while not math.isfinite(gap(hi)) or gap(hi) < 0.0:
        hi = opt.rho - (opt.rho - hi) * 4.0
        if hi <= lo:
            raise ConvergenceError("could not bracket the delay bound")
    rho = brentq(gap, lo, hi, xtol=1e-13, rtol=8.9e-16)
    m = cf.delay_moments(rho, omega_s, omega_r, spec)
    bound = cf.delay_upper_bound(m)
    return SolverResult(
        rho=rho,
        tau=m.m_s1,
        residuals=(bound - target_delay,),
        iterations=calls[0],
        converged=abs(bound - target_delay) < 1e-6 * target_delay,
    )


def solve_rho_for_load(
    xi_target: float,
    omega_s: float,
    omega_r: float,
    spec: QuadratureSpec = DEFAULT_QUAD,
) -> float:
    """Threshold producing a given queue load xi < 1 (identity metric)."""
    if not 0.0 < xi_target < 1.0:
        raise ValueError(f"xi target must lie in (0, 1), got {xi_target}")
    opt = solve_rho_opt(identity(), FadingModel("rayleigh", omega_s),
                        FadingModel("rayleigh", omega_r), spec)

    def gap(rho: float) -> float:
        return cf.delay_moments(rho, omega_s, omega_r, spec).xi - xi_target

    return brentq(gap, opt.rho * 1e-9, opt.rho * (1.0 - 1e-12), xtol=1e-14)


def solve_conv_pa_level(omega_bar: float, gamma_bar: float) -> float:
    """Water level alpha with mean water-filling power equal to the budget."""
    if not (omega_bar > 0.0 and gamma_bar > 0.0):
        raise ValueError("omega_bar and gamma_bar must be positive")
    resid = lambda a: cf.conv_pa_power_mean(a, omega_bar) - gamma_bar
    lo, hi, _, _ = _bracket(resid, 1e-4, 1e2, 1e-12, 1e12)
    return brentq(resid, lo, hi, xtol=1e-14, rtol=8.9e-16)


def tau_conv2_pa_rayleigh(
    omega_bar_s: float, omega_bar_r: float, gamma_bar: float
) -> float:
    """Conventional buffered throughput with per-link water-filling.

    Each node water-fills its own link so that its mean power over its
    transmit half equals the budget; the weaker half-rate wins.
    """
    alpha_s = solve_conv_pa_level(omega_bar_s, gamma_bar)
    alpha_r = solve_conv_pa_level(omega_bar_r, gamma_bar)
    return 0.5 * min(
        cf.conv_pa_capacity(alpha_s, omega_bar_s),
        cf.conv_pa_capacity(alpha_r, omega_bar_r),
    )
