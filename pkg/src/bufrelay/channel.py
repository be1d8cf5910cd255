"""Fading models for the source-relay and relay-destination links.

A FadingModel serves two consumers: the Monte-Carlo engine (i.i.d. draws
of the per-slot SNR or channel gain) and the analytic layer (pdf values
under quadrature). Models are immutable and safe to share across runs;
RNG state always lives with the caller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .special_functions import DEFAULT_QUAD, QuadratureSpec, integrate_semi_infinite

__all__ = ["FadingModel", "LinkSnapshot", "rayleigh", "custom", "sample", "pdf_at"]


@dataclass(frozen=True)
class FadingModel:
    """Distribution of one link's instantaneous SNR (or squared gain).

    kind "rayleigh" means the SNR is exponential with the given mean;
    kind "custom" wraps a user pdf and sampler (pdf must integrate to 1
    over [0, inf), checked at construction).
    """

    kind: str
    mean: float
    pdf: Optional[Callable[[float], float]] = None
    sampler: Optional[Callable[[np.random.Generator, int], np.ndarray]] = None

    def __post_init__(self) -> None:
        if self.kind not in ("rayleigh", "custom"):
            raise ValueError(f"unknown fading kind {self.kind!r}")
        if not self.mean > 0.0:
            raise ValueError(f"fading mean must be positive, got {self.mean}")
        if self.kind == "custom":
            if self.pdf is None or self.sampler is None:
                raise ValueError("custom fading model needs pdf and sampler callbacks")
            mass = integrate_semi_infinite(
                self.pdf, 0.0, QuadratureSpec(1e-12, 1e-12, 8000), scale=self.mean
            )
            if abs(mass - 1.0) > 1e-9:
                raise ValueError(f"custom pdf integrates to {mass!r}, not 1")


@dataclass(frozen=True)
class LinkSnapshot:
    """Instantaneous (s, r) pair observed in one slot."""

    s: float
    r: float
    slot_index: int = field(default=0)

    def __post_init__(self) -> None:
        if self.s < 0.0 or self.r < 0.0:
            raise ValueError("link SNRs must be non-negative")


def rayleigh(mean: float) -> FadingModel:
    """Rayleigh-faded link: exponential SNR with the given mean."""
    return FadingModel(kind="rayleigh", mean=mean)


def custom(
    mean: float,
    pdf: Callable[[float], float],
    sampler: Callable[[np.random.Generator, int], np.ndarray],
) -> FadingModel:
    """Arbitrary nonnegative fading law from a pdf and a matching sampler."""
    return FadingModel(kind="custom", mean=mean, pdf=pdf, sampler=sampler)


def sample(model: FadingModel, rng: np.random.Generator, size: int | None = None):
    """Draw i.i.d. values; scalar when size is None, else an array.

    Rayleigh draws use the inverse CDF (-mean * ln(1-U)): exact and
    branch-free, so a fixed seed reproduces the same sequence everywhere.
    """
    n = 1 if size is None else size
    if model.kind == "rayleigh":
        u = rng.random(n)
        out = -model.mean * np.log1p(-u)
    else:
        out = np.asarray(model.sampler(rng, n), dtype=float)
        if out.shape != (n,):
            raise ValueError("sampler returned wrong shape")
    return float(out[0]) if size is None else out


def pdf_at(model: FadingModel, x: float) -> float:
    """Density of the instantaneous SNR at x >= 0."""
    if x < 0.0:
        raise ValueError(f"pdf argument must be non-negative, got {x}")
    if model.kind == "rayleigh":
        return math.exp(-x / model.mean) / model.mean
    return float(model.pdf(x))
