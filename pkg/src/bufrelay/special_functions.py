"""Scalar special functions and semi-infinite quadrature.

Everything in this module is a pure function of its arguments. The three
primitives (exponential integral E1, real-branch Lambert W, adaptive
quadrature over [lower, inf)) back all closed-form throughput and delay
expressions in the rest of the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

__all__ = [
    "ConvergenceError",
    "QuadratureSpec",
    "DEFAULT_QUAD",
    "exp_integral_e1",
    "exp_e1_scaled",
    "lambert_w",
    "integrate_semi_infinite",
]

_EULER_GAMMA = 0.5772156649015328606065120900824024


class ConvergenceError(RuntimeError):
    """An iterative routine exhausted its budget before reaching tolerance."""


@dataclass(frozen=True)
class QuadratureSpec:
    """Accuracy contract for adaptive quadrature.

    The integral is accepted once the summed panel error estimate drops
    below max(abs_tol, rel_tol * |integral|).
    """

    abs_tol: float = 1e-9
    rel_tol: float = 1e-8
    max_subdivisions: int = 4000

    def __post_init__(self) -> None:
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")


DEFAULT_QUAD = QuadratureSpec()


# ---------------------------------------------------------------------------
# Exponential integral E1
# ---------------------------------------------------------------------------

def _e1_series(x: float) -> float:
    # E1(x) = -gamma - ln x + sum_{k>=1} (-1)^(k+1) x^k / (k k!); x below ~2
    total = -_EULER_GAMMA - math.log(x)
    power = 1.0  # x^k / k!
    for k in range(1, 200):
        power *= x / k
        term = power / k if k % 2 == 1 else -power / k
        total += term
        if abs(term) < 1e-17 * abs(total):
            return total
    raise ConvergenceError(f"E1 series did not converge for x={x}")


def _e1_cf_scaled(x: float) -> float:
    # e^x E1(x) = 1/(x+1-) 1^2/(x+3-) 2^2/(x+5-) ... by modified Lentz
    tiny = 1e-300
    f = x + 1.0
    if f == 0.0:
        f = tiny
    c = f
    d = 0.0
    for k in range(1, 5000):
        a = -float(k * k)
        b = x + 2.0 * k + 1.0
        d = b + a * d
        if d == 0.0:
            d = tiny
        c = b + a / c
        if c == 0.0:
            c = tiny
        d = 1.0 / d
        delta = c * d
        f *= delta
        if abs(delta - 1.0) < 1e-16:
            return 1.0 / f
    raise ConvergenceError(f"E1 continued fraction did not converge for x={x}")


def exp_integral_e1(x: float) -> float:
    """E1(x) = integral of e^(-t)/t over [x, inf), for x > 0.

    Series below x=1, continued fraction above; each is accurate to
    ~1e-13 relative in its regime. Underflows smoothly to 0 once
    e^(-x)/x is not representable.
    """
    if not x > 0.0:
        raise ValueError(f"E1 requires x > 0, got {x}")
    if x < 1.0:
        return _e1_series(x)
    scaled = _e1_cf_scaled(x)
    return math.exp(-x) * scaled


def exp_e1_scaled(x: float) -> float:
    """e^x * E1(x), overflow-safe for large x (tends to 1/x)."""
    if not x > 0.0:
        raise ValueError(f"E1 requires x > 0, got {x}")
    if x < 1.0:
        return math.exp(x) * _e1_series(x)
    return _e1_cf_scaled(x)


# ---------------------------------------------------------------------------
# Lambert W, real branches
# ---------------------------------------------------------------------------

_BRANCH_POINT = -math.exp(-1.0)  # -1/e in double precision


def lambert_w(branch: str, x: float) -> float:
    """Solve w * e^w = x for w on a real branch.

    branch "principal" (w >= -1) accepts x >= -1/e; branch "lower"
    (w <= -1) accepts -1/e <= x < 0. Halley iteration from a
    branch-specific starting point, capped at 50 steps.
    """
    if branch not in ("principal", "lower"):
        raise ValueError(f"unknown branch {branch!r}")
    # distance from the branch point, clamped against rounding in e*x
    t = math.e * x + 1.0
    if t < 0.0:
        if t > -1e-12:
            t = 0.0
        else:
            raise ValueError(f"x={x} below branch point -1/e")
    if branch == "lower" and x >= 0.0:
        raise ValueError(f"lower branch requires x < 0, got {x}")
    if t == 0.0:
        return -1.0
    if x == 0.0:
        return 0.0

    p = math.sqrt(2.0 * t)
    if branch == "principal":
        if x < -0.25:
            w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p**3
        elif x < math.e:
            w = x / (1.0 + x) * (1.0 + math.log1p(max(x, -0.25)))
        else:
            lg = math.log(x)
            w = lg - math.log(lg)
    else:
        if t < 0.5:
            w = -1.0 - p - p * p / 3.0 - 11.0 / 72.0 * p**3
        else:
            lg = math.log(-x)
            w = lg - math.log(-lg)

    prev_step = math.inf
    for _ in range(50):
        ew = math.exp(w)
        r = w * ew - x
        wp1 = w + 1.0
        if r == 0.0 or wp1 == 0.0:
            break
        dw = r / (ew * wp1 - (w + 2.0) * r / (2.0 * wp1))
        w -= dw
        step = abs(dw)
        # done when the step is negligible, or when rounding noise near the
        # branch point stops further progress
        if step <= 1e-15 * (1.0 + abs(w)):
            break
        if step >= prev_step and step < 1e-8 * (1.0 + abs(w)):
            break
        prev_step = step
    else:
        raise ConvergenceError(f"Lambert W did not converge for branch={branch}, x={x}")
    return w


# ---------------------------------------------------------------------------
# Adaptive Gauss-Kronrod quadrature on [lower, inf)
# ---------------------------------------------------------------------------

# 15-point Kronrod nodes/weights with embedded 7-point Gauss rule
_XGK = (
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
)
_WGK = (
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
)
_WG = (
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
)


def _gk15(g: Callable[[float], float], a: float, b: float) -> tuple[float, float]:
    """One Gauss-Kronrod 15/7 panel: returns (integral, error estimate)."""
    c = 0.5 * (a + b)
    h = 0.5 * (b - a)
    fc = g(c)
    resk = _WGK[7] * fc
    resg = _WG[3] * fc
    resabs = _WGK[7] * abs(fc)
    fv = [0.0] * 15
    fv[7] = fc
    for j in range(7):
        x = h * _XGK[j]
        f1 = g(c - x)
        f2 = g(c + x)
        fv[j] = f1
        fv[14 - j] = f2
        resk += _WGK[j] * (f1 + f2)
        resabs += _WGK[j] * (abs(f1) + abs(f2))
        if j % 2 == 1:
            resg += _WG[j // 2] * (f1 + f2)
    reskh = resk * 0.5
    resasc = _WGK[7] * abs(fc - reskh)
    for j in range(7):
        resasc += _WGK[j] * (abs(fv[j] - reskh) + abs(fv[14 - j] - reskh))
    integral = resk * h
    resasc *= abs(h)
    err = abs((resk - resg) * h)
    if resasc != 0.0 and err != 0.0:
        err = resasc * min(1.0, (200.0 * err / resasc) ** 1.5)
    if not math.isfinite(integral):
        raise ConvergenceError(f"non-finite integrand on panel [{a}, {b}]")
    return integral, err


def integrate_semi_infinite(
    f: Callable[[float], float],
    lower: float,
    spec: QuadratureSpec = DEFAULT_QUAD,
    scale: float = 1.0,
) -> float:
    """Integrate f over [lower, inf), assuming f decays faster than 1/x^2.

    The substitution u = exp(-(x - lower)/scale) maps the tail onto (0, 1];
    adaptive panel bisection then refines wherever the transformed
    integrand is rough. `scale` should be set near the integrand's decay
    length so exponential tails map to nearly flat transformed integrands.
    Deterministic: identical inputs produce bit-identical results.
    """
    if scale <= 0.0:
        raise ValueError("scale must be positive")

    def g(u: float) -> float:
        return f(lower - scale * math.log(u)) * (scale / u)

    val, err = _gk15(g, 0.0, 1.0)
    # panels kept sorted by (-error, left edge) for a deterministic pop order
    panels = [(-err, 0.0, 1.0, val)]
    total_val = val
    total_err = err
    splits = 0
    while total_err > max(spec.abs_tol, spec.rel_tol * abs(total_val)):
        if splits >= spec.max_subdivisions:
            raise ConvergenceError(
                f"quadrature needs more than {spec.max_subdivisions} subdivisions "
                f"(residual error {total_err:.3e})"
            )
        panels.sort()
        neg_err, a, b, v = panels.pop(0)
        m = 0.5 * (a + b)
        v1, e1 = _gk15(g, a, m)
        v2, e2 = _gk15(g, m, b)
        total_val += v1 + v2 - v
        total_err += e1 + e2 - (-neg_err)
        panels.append((-e1, a, m, v1))
        panels.append((-e2, m, b, v2))
        splits += 1
    # re-sum in position order so the result does not depend on split history
    panels.sort(key=lambda p: p[1])
    return math.fsum(p[3] for p in panels)
