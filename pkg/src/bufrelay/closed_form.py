"""Analytic throughput, threshold, power-allocation, and delay expressions.

Rayleigh links with the identity decision metric reduce entirely to
exponential-integral terms; the capacity metric and the power-allocated
policy need one-dimensional quadrature; everything else falls back to a
generic nested-quadrature path that doubles as the self-consistency
oracle for the specializations.

All rates are in bits per slot; delays in slots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .channel import FadingModel, pdf_at
from .policies import DecisionFunction, l1_threshold, l2_threshold
from .special_functions import (
    DEFAULT_QUAD,
    QuadratureSpec,
    exp_e1_scaled,
    exp_integral_e1,
    integrate_semi_infinite,
)

__all__ = [
    "DelayMoments",
    "tau_conv1_rayleigh",
    "tau_conv2_rayleigh",
    "arrival_rate",
    "tau_max",
    "threshold_residual",
    "pa_residuals",
    "delay_moments",
    "delay_upper_bound",
    "drop_probability_bound",
    "conv_pa_power_mean",
    "conv_pa_capacity",
]

_LN2 = math.log(2.0)
_EXP_UNDERFLOW = 745.0


def _check_means(omega_s: float, omega_r: float) -> None:
    if not (omega_s > 0.0 and omega_r > 0.0):
        raise ValueError(f"link means must be positive, got ({omega_s}, {omega_r})")


def _inner_spec(spec: QuadratureSpec) -> QuadratureSpec:
    # inner integrals run 10x tighter so the outer tolerance budget holds
    return QuadratureSpec(spec.abs_tol / 10.0, spec.rel_tol / 10.0, spec.max_subdivisions)


def _cap_tail(a: float, omega: float) -> float:
    """Integral of log2(1+x) times an exponential(omega) pdf over [a, inf)."""
    if a <= 0.0:
        return exp_e1_scaled(1.0 / omega) / _LN2
    x = a / omega
    if not x < _EXP_UNDERFLOW:
        return 0.0
    return math.exp(-x) * (math.log1p(a) + exp_e1_scaled((1.0 + a) / omega)) / _LN2


# ---------------------------------------------------------------------------
# Conventional baselines
# ---------------------------------------------------------------------------

def tau_conv1_rayleigh(omega_s: float, omega_r: float) -> float:
    """Throughput of the bufferless receive/forward alternating schedule.

    Half of the mean capacity of the weaker draw: min of two independent
    exponentials is exponential with the harmonic-sum mean.
    """
    _check_means(omega_s, omega_r)
    x = (omega_r + omega_s) / (omega_s * omega_r)
    return exp_e1_scaled(x) / (2.0 * _LN2)


def tau_conv2_rayleigh(omega_s: float, omega_r: float) -> float:
    """Throughput of the half-receive / half-transmit buffered schedule."""
    _check_means(omega_s, omega_r)
    return min(exp_e1_scaled(1.0 / omega_s), exp_e1_scaled(1.0 / omega_r)) / (2.0 * _LN2)


# ---------------------------------------------------------------------------
# Adaptive link selection with fixed powers
# ---------------------------------------------------------------------------

def _mean_arrival_identity(rho: float, omega_s: float, omega_r: float) -> float:
    # E{(1-d) S}: source-side rate under the identity metric, Rayleigh links
    x = (omega_r + rho * omega_s) / (omega_s * omega_r)
    frac = omega_r / (omega_r + rho * omega_s)
    return (exp_e1_scaled(1.0 / omega_s) - frac * exp_e1_scaled(x)) / _LN2


def _mean_departure_identity(rho: float, omega_s: float, omega_r: float) -> float:
    # E{d R}: relay-side rate under the identity metric, Rayleigh links
    y = (omega_r + rho * omega_s) / (rho * omega_s * omega_r)
    frac = rho * omega_s / (omega_r + rho * omega_s)
    return (exp_e1_scaled(1.0 / omega_r) - frac * exp_e1_scaled(y)) / _LN2


def _mean_arrival_log(
    rho: float, omega_s: float, omega_r: float, spec: QuadratureSpec
) -> float:
    def f(r: float) -> float:
        z = (1.0 + r) ** (1.0 / rho)
        return _cap_tail(z - 1.0, omega_s) * math.exp(-r / omega_r) / omega_r

    return integrate_semi_infinite(f, 0.0, spec, scale=omega_r)


def _mean_departure_log(
    rho: float, omega_s: float, omega_r: float, spec: QuadratureSpec
) -> float:
    def f(s: float) -> float:
        z = (1.0 + s) ** rho
        return _cap_tail(z - 1.0, omega_r) * math.exp(-s / omega_s) / omega_s

    return integrate_semi_infinite(f, 0.0, spec, scale=omega_s)


def _mean_arrival_generic(
    f: DecisionFunction,
    rho: float,
    model_s: FadingModel,
    model_r: FadingModel,
    spec: QuadratureSpec,
) -> float:
    inner = _inner_spec(spec)

    def integrand(r: float) -> float:
        g = float(f.inverse(f.forward(r) / rho))
        tail = integrate_semi_infinite(
            lambda s: math.log2(1.0 + s) * pdf_at(model_s, s),
            max(g, 0.0),
            inner,
            scale=model_s.mean,
        )
        return tail * pdf_at(model_r, r)

    return integrate_semi_infinite(integrand, 0.0, spec, scale=model_r.mean)


def _mean_departure_generic(
    f: DecisionFunction,
    rho: float,
    model_s: FadingModel,
    model_r: FadingModel,
    spec: QuadratureSpec,
) -> float:
    inner = _inner_spec(spec)

    def integrand(s: float) -> float:
        h = float(f.inverse(rho * f.forward(s)))
        tail = integrate_semi_infinite(
            lambda r: math.log2(1.0 + r) * pdf_at(model_r, r),
            max(h, 0.0),
            inner,
            scale=model_r.mean,
        )
        return tail * pdf_at(model_s, s)

    return integrate_semi_infinite(integrand, 0.0, spec, scale=model_s.mean)


def _threshold_rates(
    f: DecisionFunction,
    rho: float,
    model_s: FadingModel,
    model_r: FadingModel,
    spec: QuadratureSpec,
    method: str,
) -> tuple[float, float]:
    if not rho > 0.0:
        raise ValueError(f"rho must be positive, got {rho}")
    rayleigh = model_s.kind == "rayleigh" and model_r.kind == "rayleigh"
    if method == "auto" and rayleigh and f.kind == "identity":
        return (
            _mean_arrival_identity(rho, model_s.mean, model_r.mean),
            _mean_departure_identity(rho, model_s.mean, model_r.mean),
        )
    if method == "auto" and rayleigh and f.kind == "log_capacity":
        return (
            _mean_arrival_log(rho, model_s.mean, model_r.mean, spec),
            _mean_departure_log(rho, model_s.mean, model_r.mean, spec),
        )
    if method not in ("auto", "generic"):
        raise ValueError(f"unknown method {method!r}")
    return (
        _mean_arrival_generic(f, rho, model_s, model_r, spec),
        _mean_departure_generic(f, rho, model_s, model_r, spec),
    )


def arrival_rate(
    f: DecisionFunction,
    rho: float,
    model_s: FadingModel,
    model_r: FadingModel,
    spec: QuadratureSpec = DEFAULT_QUAD,
    method: str = "auto",
) -> float:
    """Mean bits/slot entering the relay queue, E{(1-d) S}."""
    return _threshold_rates(f, rho, model_s, model_r, spec, method)[0]


def tau_max(
    f: DecisionFunction,
    rho: float,
    model_s: FadingModel,
    model_r: FadingModel,
    spec: QuadratureSpec = DEFAULT_QUAD,
    method: str = "auto",
) -> float:
    """Mean bits/slot leaving the relay, E{d R}; maximal at the balance root."""
    return _threshold_rates(f, rho, model_s, model_r, spec, method)[1]


def threshold_residual(
    f: DecisionFunction,
    rho: float,
    model_s: FadingModel,
    model_r: FadingModel,
    spec: QuadratureSpec = DEFAULT_QUAD,
    method: str = "auto",
) -> float:
    """Arrival minus departure rate at this rho.

    Negative when the relay drains faster than the source fills (small
    rho), positive once arrivals dominate; the balance root is the optimal
    decision threshold. Strictly increasing in rho.
    """
    arr, dep = _threshold_rates(f, rho, model_s, model_r, spec, method)
    return arr - dep


# ---------------------------------------------------------------------------
# Joint link selection and power allocation
# ---------------------------------------------------------------------------

def _pa_terms_rayleigh(
    lam: float,
    rho: float,
    om_s: float,
    om_r: float,
    gamma_bar: float,
    spec: QuadratureSpec,
) -> tuple[float, float, float]:
    cut_s = lam / (rho * om_s)
    cut_r = lam / om_r
    cdf_r = -math.expm1(-cut_r)  # Pr{h_R < lam}
    cdf_s = -math.expm1(-cut_s)  # Pr{h_S < lam/rho}

    def arr_tail(h_r: float) -> float:
        l1 = l1_threshold(h_r, lam, rho)
        x = l1 / om_s
        if not x < _EXP_UNDERFLOW:
            return 0.0
        bracket = math.exp(-x) * math.log(rho * l1 / lam) + exp_integral_e1(x)
        return bracket * math.exp(-h_r / om_r) / om_r

    def dep_tail(h_s: float) -> float:
        l2 = l2_threshold(h_s, lam, rho)
        x = l2 / om_r
        if not x < _EXP_UNDERFLOW:
            return 0.0
        bracket = math.exp(-x) * math.log(l2 / lam) + exp_integral_e1(x)
        return bracket * math.exp(-h_s / om_s) / om_s

    def pow_s_tail(h_r: float) -> float:
        l1 = l1_threshold(h_r, lam, rho)
        x = l1 / om_s
        if not x < _EXP_UNDERFLOW:
            return 0.0
        bracket = (rho / lam) * math.exp(-x) - exp_integral_e1(x) / om_s
        return bracket * math.exp(-h_r / om_r) / om_r

    def pow_r_tail(h_s: float) -> float:
        l2 = l2_threshold(h_s, lam, rho)
        x = l2 / om_r
        if not x < _EXP_UNDERFLOW:
            return 0.0
        bracket = (1.0 / lam) * math.exp(-x) - exp_integral_e1(x) / om_r
        return bracket * math.exp(-h_s / om_s) / om_s

    arr = (cdf_r * exp_integral_e1(cut_s)
           + integrate_semi_infinite(arr_tail, lam, spec, scale=om_r)) / _LN2
    dep = (cdf_s * exp_integral_e1(cut_r)
           + integrate_semi_infinite(dep_tail, lam / rho, spec, scale=om_s)) / _LN2
    power = (
        cdf_r * ((rho / lam) * math.exp(-cut_s) - exp_integral_e1(cut_s) / om_s)
        + integrate_semi_infinite(pow_s_tail, lam, spec, scale=om_r)
        + cdf_s * ((1.0 / lam) * math.exp(-cut_r) - exp_integral_e1(cut_r) / om_r)
        + integrate_semi_infinite(pow_r_tail, lam / rho, spec, scale=om_s)
    )
    return arr - dep, power - gamma_bar, arr


def _pa_terms_generic(
    lam: float,
    rho: float,
    model_hs: FadingModel,
    model_hr: FadingModel,
    gamma_bar: float,
    spec: QuadratureSpec,
) -> tuple[float, float, float]:
    inner = _inner_spec(spec)
    om_s, om_r = model_hs.mean, model_hr.mean

    def tail_s(lower: float, weight) -> float:
        return integrate_semi_infinite(
            lambda h: weight(h) * pdf_at(model_hs, h), lower, inner, scale=om_s
        )

    def tail_r(lower: float, weight) -> float:
        return integrate_semi_infinite(
            lambda h: weight(h) * pdf_at(model_hr, h), lower, inner, scale=om_r
        )

    rate_s = lambda h: math.log2(rho * h / lam)
    rate_r = lambda h: math.log2(h / lam)
    pow_s = lambda h: rho / lam - 1.0 / h
    pow_r = lambda h: 1.0 / lam - 1.0 / h

    cdf_r = 1.0 - tail_r(lam, lambda h: 1.0)  # Pr{h_R < lam}
    cdf_s = 1.0 - tail_s(lam / rho, lambda h: 1.0)  # Pr{h_S < lam/rho}

    def arr_outer(h_r: float) -> float:
        l1 = l1_threshold(h_r, lam, rho)
        if not math.isfinite(l1):
            return 0.0
        return tail_s(l1, rate_s) * pdf_at(model_hr, h_r)

    def dep_outer(h_s: float) -> float:
        l2 = l2_threshold(h_s, lam, rho)
        if not math.isfinite(l2):
            return 0.0
        return tail_r(l2, rate_r) * pdf_at(model_hs, h_s)

    def pow_s_outer(h_r: float) -> float:
        l1 = l1_threshold(h_r, lam, rho)
        if not math.isfinite(l1):
            return 0.0
        return tail_s(l1, pow_s) * pdf_at(model_hr, h_r)

    def pow_r_outer(h_s: float) -> float:
        l2 = l2_threshold(h_s, lam, rho)
        if not math.isfinite(l2):
            return 0.0
        return tail_r(l2, pow_r) * pdf_at(model_hs, h_s)

    arr = cdf_r * tail_s(lam / rho, rate_s) + integrate_semi_infinite(
        arr_outer, lam, spec, scale=om_r
    )
    dep = cdf_s * tail_r(lam, rate_r) + integrate_semi_infinite(
        dep_outer, lam / rho, spec, scale=om_s
    )
    power = (
        cdf_r * tail_s(lam / rho, pow_s)
        + integrate_semi_infinite(pow_s_outer, lam, spec, scale=om_r)
        + cdf_s * tail_r(lam, pow_r)
        + integrate_semi_infinite(pow_r_outer, lam / rho, spec, scale=om_s)
    )
    return arr - dep, power - gamma_bar, arr


def pa_residuals(
    lam: float,
    rho: float,
    model_hs: FadingModel,
    model_hr: FadingModel,
    gamma_bar: float,
    spec: QuadratureSpec = DEFAULT_QUAD,
    method: str = "auto",
) -> tuple[float, float, float]:
    """Rate-balance and power-budget residuals plus throughput at (lam, rho).

    Returns (rate_residual, power_residual, tau): the first vanishes when
    source-side and relay-side rates balance, the second when the mean
    consumed normalized power meets gamma_bar exactly; tau is the
    source-side rate, which equals the throughput at the joint root.
    """
    if not (lam > 0.0 and rho > 0.0 and gamma_bar > 0.0):
        raise ValueError("lam, rho, and gamma_bar must all be positive")
    rayleigh = model_hs.kind == "rayleigh" and model_hr.kind == "rayleigh"
    if method == "auto" and rayleigh:
        return _pa_terms_rayleigh(
            lam, rho, model_hs.mean, model_hr.mean, gamma_bar, spec
        )
    if method not in ("auto", "generic"):
        raise ValueError(f"unknown method {method!r}")
    return _pa_terms_generic(lam, rho, model_hs, model_hr, gamma_bar, spec)


# ---------------------------------------------------------------------------
# Delay moments and bounds (identity metric, Rayleigh links)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DelayMoments:
    """First and second moments of the per-slot arrival/departure rates.

    m_s1/m_r1 are the mean source-side and relay-side rates (bits/slot);
    m_s2/m_r2 the matching second moments; xi = m_s1/m_r1 is the queue
    load factor (stable below one).
    """

    m_s1: float
    m_r1: float
    m_s2: float
    m_r2: float

    @property
    def xi(self) -> float:
        return self.m_s1 / self.m_r1


def delay_moments(
    rho: float,
    omega_s: float,
    omega_r: float,
    spec: QuadratureSpec = DEFAULT_QUAD,
) -> DelayMoments:
    """Moments of the identity-metric policy on Rayleigh links at this rho."""
    _check_means(omega_s, omega_r)
    if not rho > 0.0:
        raise ValueError(f"rho must be positive, got {rho}")
    m_s1 = _mean_arrival_identity(rho, omega_s, omega_r)
    m_r1 = _mean_departure_identity(rho, omega_s, omega_r)

    # second moments: integrate the squared rate against the probability
    # that the other link loses the comparison (Fubini on the selection
    # region collapses the double integral to one dimension)
    def f_s2(s: float) -> float:
        sel = -math.expm1(-rho * s / omega_r)  # Pr{r < rho s}
        return (math.log2(1.0 + s) ** 2) * sel * math.exp(-s / omega_s) / omega_s

    def f_r2(r: float) -> float:
        sel = -math.expm1(-r / (rho * omega_s))  # Pr{s <= r / rho}
        return (math.log2(1.0 + r) ** 2) * sel * math.exp(-r / omega_r) / omega_r

    m_s2 = integrate_semi_infinite(f_s2, 0.0, spec, scale=omega_s)
    m_r2 = integrate_semi_infinite(f_r2, 0.0, spec, scale=omega_r)
    return DelayMoments(m_s1=m_s1, m_r1=m_r1, m_s2=m_s2, m_r2=m_r2)


def _delay_second_moments_nested(
    rho: float,
    omega_s: float,
    omega_r: float,
    spec: QuadratureSpec = DEFAULT_QUAD,
) -> tuple[float, float]:
    """Second moments by literal nested quadrature; cross-check path."""
    inner = _inner_spec(spec)

    def outer_s2(r: float) -> float:
        tail = integrate_semi_infinite(
            lambda s: (math.log2(1.0 + s) ** 2) * math.exp(-s / omega_s) / omega_s,
            r / rho,
            inner,
            scale=omega_s,
        )
        return tail * math.exp(-r / omega_r) / omega_r

    def outer_r2(s: float) -> float:
        tail = integrate_semi_infinite(
            lambda r: (math.log2(1.0 + r) ** 2) * math.exp(-r / omega_r) / omega_r,
            s * rho,
            inner,
            scale=omega_r,
        )
        return tail * math.exp(-s / omega_s) / omega_s

    m_s2 = integrate_semi_infinite(outer_s2, 0.0, spec, scale=omega_r)
    m_r2 = integrate_semi_infinite(outer_r2, 0.0, spec, scale=omega_s)
    return m_s2, m_r2


def delay_upper_bound(m: DelayMoments) -> float:
    """Upper bound on the mean queueing delay in slots for a starved queue."""
    if not m.m_s1 > 0.0:
        raise ValueError("delay bound needs a positive arrival rate")
    xi = m.xi
    if not xi < 1.0:
        raise ValueError(f"queue load xi={xi} not below 1; bound invalid")
    return 0.5 / m.m_s1 * (m.m_s2 + xi * (2.0 - xi) * m.m_r2) / (m.m_r1 - m.m_s1)


def drop_probability_bound(mean_queue: float, q_max: float) -> float:
    """Markov bound on the chance the queue exceeds q_max."""
    if not q_max > 0.0:
        raise ValueError(f"q_max must be positive, got {q_max}")
    if mean_queue < 0.0:
        raise ValueError(f"mean queue must be non-negative, got {mean_queue}")
    return min(1.0, mean_queue / q_max)


# ---------------------------------------------------------------------------
# Water-filling for the conventional buffered baseline
# ---------------------------------------------------------------------------

def conv_pa_power_mean(alpha: float, omega_bar: float) -> float:
    """Mean water-filling power max(0, 1/alpha - 1/h) on a Rayleigh link."""
    if not (alpha > 0.0 and omega_bar > 0.0):
        raise ValueError("alpha and omega_bar must be positive")
    x = alpha / omega_bar
    if not x < _EXP_UNDERFLOW:
        return 0.0
    return math.exp(-x) / alpha - exp_integral_e1(x) / omega_bar


def conv_pa_capacity(alpha: float, omega_bar: float) -> float:
    """Mean link rate (bits/slot while transmitting) under that water level."""
    if not (alpha > 0.0 and omega_bar > 0.0):
        raise ValueError("alpha and omega_bar must be positive")
    x = alpha / omega_bar
    if not x < _EXP_UNDERFLOW:
        return 0.0
    return exp_integral_e1(x) / _LN2
