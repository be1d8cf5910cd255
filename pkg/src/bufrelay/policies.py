"""Link-selection and power-allocation rules.

Covers the adaptive threshold rule (relay transmits when its link metric
beats rho times the source's), the jointly optimal selection plus
water-filling power rule under an average power budget, the queue-limiting
variant that forces the relay to transmit when the buffer could overflow,
and the fixed receive/transmit schedules of the two conventional baselines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .special_functions import ConvergenceError, lambert_w

__all__ = [
    "DecisionFunction",
    "identity",
    "log_capacity",
    "PolicySpec",
    "PROTOCOLS",
    "select_fixed_power",
    "allocate_power",
    "select_with_power",
    "l_thresholds",
    "l1_threshold",
    "l2_threshold",
    "select_queue_limited",
    "conventional_schedule",
]


@dataclass(frozen=True)
class DecisionFunction:
    """Strictly increasing nonnegative metric F with its inverse.

    forward/inverse accept scalars or numpy arrays. kind tags the two
    built-in variants so closed forms can dispatch to specializations.
    """

    kind: str
    forward: Callable = field(repr=False)
    inverse: Callable = field(repr=False)


def identity() -> DecisionFunction:
    """F(x) = x: analytically tractable, near-optimal in practice."""
    return DecisionFunction("identity", lambda x: x, lambda y: y)


def log_capacity() -> DecisionFunction:
    """F(x) = log2(1+x): selection by instantaneous link capacity."""
    return DecisionFunction(
        "log_capacity",
        lambda x: np.log2(1.0 + x),
        lambda y: np.exp2(y) - 1.0,
    )


PROTOCOLS = (
    "conv_no_buffer",
    "conv_buffer",
    "adaptive_fixed",
    "adaptive_pa",
    "starved",
    "queue_limited",
)


@dataclass(frozen=True)
class PolicySpec:
    """A protocol identifier plus every knob it needs.

    lam and gamma_bar only matter for adaptive_pa (the water-filling dual
    variable and the average normalized power budget); q_max is the buffer
    capacity, infinite by default.
    """

    protocol: str
    rho: float = 1.0
    lam: float | None = None
    gamma_bar: float | None = None
    q_max: float = math.inf
    decision_fn: DecisionFunction = field(default_factory=log_capacity)

    def __post_init__(self) -> None:
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {self.protocol!r}")
        if not self.rho > 0.0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        if not self.q_max > 0.0:
            raise ValueError(f"q_max must be positive (or inf), got {self.q_max}")
        if self.protocol == "adaptive_pa":
            if self.lam is None or not self.lam > 0.0:
                raise ValueError("adaptive_pa needs lam > 0")
            if self.gamma_bar is None or not self.gamma_bar > 0.0:
                raise ValueError("adaptive_pa needs gamma_bar > 0")


def select_fixed_power(s: float, r: float, rho: float, f: DecisionFunction) -> int:
    """1 if the relay transmits, 0 if the source does; tie goes to the relay."""
    return 1 if f.forward(r) >= rho * f.forward(s) else 0


def allocate_power(h_s: float, h_r: float, lam: float, rho: float) -> tuple[float, float]:
    """Water-filling powers with link-specific levels rho/lam and 1/lam.

    Each link gets power only above its cutoff (h_S > lam/rho, h_R > lam);
    the returned pair is (gamma_s, gamma_r), both zero-floored.
    """
    gamma_s = rho / lam - 1.0 / h_s if h_s > lam / rho else 0.0
    gamma_r = 1.0 / lam - 1.0 / h_r if h_r > lam else 0.0
    return gamma_s, gamma_r


def _metric_relay(h_r: float, lam: float) -> float:
    return math.log(h_r / lam) + lam / h_r - 1.0


def _metric_source(h_s: float, lam: float, rho: float) -> float:
    return rho * math.log(rho * h_s / lam) + lam / h_s - rho


def select_with_power(h_s: float, h_r: float, lam: float, rho: float) -> int:
    """Joint selection under water-filling powers.

    The relay transmits when its rate-minus-power metric beats the
    source's (both links above cutoff), or when it alone is above cutoff.
    When the relay link is below cutoff the source transmits if it can;
    if both are below cutoff the slot is idle (d=0 with zero power).
    """
    if not h_r > lam:
        return 0
    if not h_s > lam / rho:
        return 1
    return 1 if _metric_relay(h_r, lam) > _metric_source(h_s, lam, rho) else 0


def _resolve_w_branch(arg: float, lam_over: float, cutoff: float, what: str) -> float:
    """Pick the W branch whose threshold -lam_over/W(arg) lands at/above cutoff."""
    for branch in ("principal", "lower"):
        w = lambert_w(branch, arg)
        if w >= 0.0:
            continue
        if w > -1e-290:
            # the crossing sits beyond any representable gain
            return math.inf
        threshold = -lam_over / w
        if threshold >= cutoff * (1.0 - 1e-9):
            return max(threshold, cutoff)
    raise ConvergenceError(
        f"no real Lambert-W branch puts {what} at or above its cutoff (arg={arg})"
    )


def l1_threshold(h_r: float, lam: float, rho: float) -> float:
    """Source gain at which the selection metrics cross, given h_r >= lam.

    The relay is preferred for h_s below this value. The W argument lies
    in [-1/e, 0) by construction; underflow to -0.0 means the crossing has
    escaped to infinity (the relay link is overwhelmingly strong).
    """
    h_r, lam, rho = float(h_r), float(lam), float(rho)
    if not (lam > 0.0 and rho > 0.0):
        raise ValueError("lam and rho must be positive")
    if h_r < lam:
        raise ValueError(f"L1 needs h_r >= lam, got h_r={h_r}, lam={lam}")
    log_neg_arg = (h_r - lam) / (rho * h_r) - 1.0 + math.log(lam / h_r) / rho
    arg = -math.exp(log_neg_arg)
    if arg == 0.0:
        return math.inf
    return _resolve_w_branch(arg, lam / rho, lam / rho, "L1")


def l2_threshold(h_s: float, lam: float, rho: float) -> float:
    """Relay gain at the metric crossing, given h_s >= lam/rho.

    The relay is preferred for h_r above this value; always >= lam.
    """
    h_s, lam, rho = float(h_s), float(lam), float(rho)
    if not (lam > 0.0 and rho > 0.0):
        raise ValueError("lam and rho must be positive")
    if h_s < lam / rho:
        raise ValueError(f"L2 needs h_s >= lam/rho, got h_s={h_s}, lam/rho={lam / rho}")
    log_neg_arg = rho - 1.0 - lam / h_s + rho * math.log(lam / (rho * h_s))
    arg = -math.exp(log_neg_arg)
    if arg == 0.0:
        return math.inf
    return _resolve_w_branch(arg, lam, lam, "L2")


def l_thresholds(h_r: float, h_s: float, lam: float, rho: float) -> tuple[float, float]:
    """Both metric-crossing thresholds: (L1 for the given h_r, L2 for h_s)."""
    return l1_threshold(h_r, lam, rho), l2_threshold(h_s, lam, rho)


def select_queue_limited(
    s: float,
    r: float,
    rho: float,
    f: DecisionFunction,
    q: float,
    q_max: float,
) -> int:
    """Threshold rule unless the buffer might overflow, then force the relay."""
    if q_max - q > math.log2(1.0 + s):
        return select_fixed_power(s, r, rho, f)
    return 1


def conventional_schedule(protocol: str, slot: int, horizon: int) -> int:
    """Fixed schedules: alternate slots, or receive-half then transmit-half."""
    if horizon % 2 != 0 or horizon < 2:
        raise ValueError(f"conventional schedules need an even horizon, got {horizon}")
    if not 1 <= slot <= horizon:
        raise ValueError(f"slot {slot} outside 1..{horizon}")
    if protocol == "conv_no_buffer":
        return 1 if slot % 2 == 0 else 0
    if protocol == "conv_buffer":
        return 0 if slot <= horizon // 2 else 1
    raise ValueError(f"not a conventional protocol: {protocol!r}")
