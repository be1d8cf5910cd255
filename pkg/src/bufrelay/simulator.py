"""Slot-by-slot Monte-Carlo engine.

Each run draws its fading sequence up front (vectorized), applies the
configured policy to get per-slot decisions and rates, then walks the
slots once to update the relay queue and the delay/drop accounting. The
walk is the only sequential part; everything else is numpy.

A run is deterministic given its seed and owns all of its state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .channel import FadingModel, sample
from .policies import PolicySpec
from .relay_buffer import RelayBuffer

__all__ = ["SimConfig", "Metrics", "TRACE_COLUMNS", "run", "run_conventional_finite"]

TRACE_COLUMNS = ("slot", "s", "r", "d", "S", "R", "Q")
_TRACE_ROW_CAP = 1_000_000


@dataclass(frozen=True)
class SimConfig:
    """Everything one run needs: policy, link models, horizon, seed."""

    policy: PolicySpec
    model_s: FadingModel
    model_r: FadingModel
    slots: int
    seed: int = 0
    warmup_slots: int = 10_000
    record_trace: bool = False
    # count slots whose end-of-slot queue exceeds this level (defaults to
    # the policy's q_max); used for Markov-bound checks on unbounded runs
    overflow_threshold: Optional[float] = None

    def __post_init__(self) -> None:
        if self.slots < 1:
            raise ValueError(f"slots must be >= 1, got {self.slots}")
        if not 0 <= self.warmup_slots < self.slots:
            raise ValueError(
                f"warmup must lie in [0, slots), got {self.warmup_slots}/{self.slots}"
            )
        if self.policy.protocol in ("conv_no_buffer", "conv_buffer"):
            if self.slots % 2 != 0:
                raise ValueError("conventional schedules need an even number of slots")
            if self.warmup_slots % 2 != 0:
                raise ValueError("conventional schedules need an even warmup")


@dataclass(frozen=True)
class Metrics:
    """Post-warmup averages of one run.

    throughput and departure_rate are the same number (bits leaving the
    relay per slot); arrival_rate counts bits offered by the source per
    slot, so arrival_rate >= throughput for runs started empty.
    """

    throughput: float
    arrival_rate: float
    departure_rate: float
    mean_queue: float
    mean_delay_fifo: float
    mean_delay_little: float
    drop_prob: float
    overflow_event_prob: float
    mean_power: float
    relay_idle_slots: int
    source_idle_slots: int
    relay_queue_limited_frac: float
    slots_measured: int
    total_arrival_bits: float
    total_admitted_bits: float
    total_departed_bits: float
    total_dropped_bits: float
    queue_at_measure_start: float
    final_queue: float
    throughput_stderr: float
    trace: Optional[np.ndarray] = field(default=None, repr=False, compare=False)


def _draw_links(config: SimConfig) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(config.seed)
    s = sample(config.model_s, rng, config.slots)
    r = sample(config.model_r, rng, config.slots)
    return s, r


def _decisions_fixed(policy: PolicySpec, s: np.ndarray, r: np.ndarray) -> np.ndarray:
    f = policy.decision_fn.forward
    return np.asarray(f(r)) >= policy.rho * np.asarray(f(s))


def _decisions_pa(
    policy: PolicySpec, h_s: np.ndarray, h_r: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized joint selection and water-filling rates/energies."""
    lam, rho = policy.lam, policy.rho
    above_r = h_r > lam
    above_s = h_s > lam / rho
    with np.errstate(divide="ignore", invalid="ignore"):
        metric_r = np.log(h_r / lam) + lam / h_r - 1.0
        metric_s = rho * np.log(rho * h_s / lam) + lam / h_s - rho
        d = (above_r & above_s & (metric_r > metric_s)) | (above_r & ~above_s)
        src_rate = np.where(~d & above_s, np.log2(rho * h_s / lam), 0.0)
        rel_rate = np.where(d, np.log2(h_r / lam), 0.0)
        gamma_s = np.where(~d & above_s, rho / lam - 1.0 / h_s, 0.0)
        gamma_r = np.where(d, 1.0 / lam - 1.0 / h_r, 0.0)
    return d, src_rate, rel_rate, gamma_s + gamma_r


def run(config: SimConfig) -> Metrics:
    """Simulate one run and return its post-warmup metrics."""
    protocol = config.policy.protocol
    if protocol in ("conv_buffer",):
        return _run_conventional_buffer(config, config.policy.q_max)

    s, r = _draw_links(config)
    policy = config.policy
    energy = None
    if protocol == "adaptive_pa":
        d, offered, caps, energy = _decisions_pa(policy, s, r)
    elif protocol in ("adaptive_fixed", "starved"):
        d = _decisions_fixed(policy, s, r)
        offered = np.where(~d, np.log2(1.0 + s), 0.0)
        caps = np.where(d, np.log2(1.0 + r), 0.0)
    elif protocol == "queue_limited":
        # base decision precomputed; the overflow override needs the live queue
        d = _decisions_fixed(policy, s, r)
        offered = np.log2(1.0 + s)  # potential source rate, every slot
        caps = np.log2(1.0 + r)
    elif protocol == "conv_no_buffer":
        slots_idx = np.arange(1, config.slots + 1)
        d = slots_idx % 2 == 0
        offered = np.where(~d, np.log2(1.0 + s), 0.0)
        caps = np.where(d, np.log2(1.0 + r), 0.0)
    else:
        raise ValueError(f"run() cannot handle protocol {protocol!r}")

    return _queue_walk(config, s, r, d, offered, caps, energy)


def _queue_walk(
    config: SimConfig,
    s: np.ndarray,
    r: np.ndarray,
    d: np.ndarray,
    offered: np.ndarray,
    caps: np.ndarray,
    energy: Optional[np.ndarray],
) -> Metrics:
    policy = config.policy
    protocol = policy.protocol
    queue_limited = protocol == "queue_limited"
    flush_after_tx = protocol == "conv_no_buffer"
    q_max = policy.q_max
    threshold = (
        config.overflow_threshold if config.overflow_threshold is not None else q_max
    )
    warmup = config.warmup_slots
    n = config.slots

    buf = RelayBuffer(capacity=q_max)
    d_l = d.tolist()
    off_l = offered.tolist()
    cap_l = caps.tolist()
    en_l = energy.tolist() if energy is not None else None

    trace = None
    trace_rows = 0
    if config.record_trace:
        trace = np.zeros((min(n, _TRACE_ROW_CAP), len(TRACE_COLUMNS)))

    arr_sum = adm_sum = dep_sum = drop_sum = 0.0
    dep_sq_sum = 0.0
    q_sum = 0.0
    energy_sum = 0.0
    over_slots = 0
    relay_idle = source_idle = 0
    relay_q_limited = 0
    relay_slots = 0
    q_at_start = 0.0
    dep_bits_mark = prod_mark = 0.0
    measured = 0

    enqueue = buf.enqueue
    dequeue = buf.dequeue
    log2 = math.log2

    for i in range(n):
        slot = i + 1
        if slot == warmup + 1:
            q_at_start = buf.q
            dep_bits_mark = buf.departed_bits
            prod_mark = buf.departed_bit_slot_product

        di = d_l[i]
        if queue_limited:
            # force the relay whenever the source's bits might not fit
            if not (q_max - buf.q > off_l[i]):
                di = True
        sent = 0.0
        got = 0.0
        dropped = 0.0
        shortfall = False
        if di:
            cap = cap_l[i]
            shortfall = cap > buf.q
            sent = dequeue(cap, slot)
            if flush_after_tx and buf.q > 0.0:
                # bufferless baseline: bits not forwarded this pair are lost
                dropped = buf.q
                buf.batches.clear()
                buf.q = 0.0
                buf.dropped_bits += dropped
        else:
            got = off_l[i]
            _, dropped = enqueue(got, slot)

        if slot > warmup:
            measured += 1
            q_sum += buf.q
            drop_sum += dropped
            if di:
                relay_slots += 1
                dep_sum += sent
                dep_sq_sum += sent * sent
                if sent == 0.0:
                    relay_idle += 1
                if shortfall:
                    relay_q_limited += 1
            else:
                arr_sum += got
                adm_sum += got - dropped
                if got == 0.0:
                    source_idle += 1
            if buf.q > threshold:
                over_slots += 1
            if en_l is not None:
                energy_sum += en_l[i]

        if trace is not None and trace_rows < trace.shape[0]:
            trace[trace_rows] = (slot, s[i], r[i], di, got, sent, buf.q)
            trace_rows += 1

    return _assemble_metrics(
        measured,
        arr_sum,
        adm_sum,
        dep_sum,
        dep_sq_sum,
        drop_sum,
        q_sum,
        energy_sum if en_l is not None else math.nan,
        over_slots,
        relay_idle,
        source_idle,
        relay_q_limited,
        relay_slots,
        q_at_start,
        buf,
        dep_bits_mark,
        prod_mark,
        trace[:trace_rows] if trace is not None else None,
    )


def _assemble_metrics(
    measured: int,
    arr_sum: float,
    adm_sum: float,
    dep_sum: float,
    dep_sq_sum: float,
    drop_sum: float,
    q_sum: float,
    energy_sum: float,
    over_slots: int,
    relay_idle: int,
    source_idle: int,
    relay_q_limited: int,
    relay_slots: int,
    q_at_start: float,
    buf: RelayBuffer,
    dep_bits_mark: float,
    prod_mark: float,
    trace: Optional[np.ndarray],
) -> Metrics:
    throughput = dep_sum / measured
    arrival_rate = arr_sum / measured
    admitted_rate = adm_sum / measured
    mean_queue = q_sum / measured
    dep_bits = buf.departed_bits - dep_bits_mark
    dep_prod = buf.departed_bit_slot_product - prod_mark
    mean_delay_fifo = dep_prod / dep_bits if dep_bits > 0.0 else 0.0
    mean_delay_little = mean_queue / admitted_rate if admitted_rate > 0.0 else 0.0
    drop_prob = drop_sum / arr_sum if arr_sum > 0.0 else 0.0
    var = max(dep_sq_sum / measured - throughput * throughput, 0.0)
    stderr = math.sqrt(var / measured)
    return Metrics(
        throughput=throughput,
        arrival_rate=arrival_rate,
        departure_rate=throughput,
        mean_queue=mean_queue,
        mean_delay_fifo=mean_delay_fifo,
        mean_delay_little=mean_delay_little,
        drop_prob=drop_prob,
        overflow_event_prob=over_slots / measured,
        mean_power=energy_sum / measured if not math.isnan(energy_sum) else math.nan,
        relay_idle_slots=relay_idle,
        source_idle_slots=source_idle,
        relay_queue_limited_frac=relay_q_limited / relay_slots if relay_slots else 0.0,
        slots_measured=measured,
        total_arrival_bits=arr_sum,
        total_admitted_bits=adm_sum,
        total_departed_bits=dep_sum,
        total_dropped_bits=drop_sum,
        queue_at_measure_start=q_at_start,
        final_queue=buf.q,
        throughput_stderr=stderr,
        trace=trace,
    )


def _run_conventional_buffer(config: SimConfig, q_max: float) -> Metrics:
    """Receive for the first half of the horizon, transmit for the second.

    Arrivals beyond the buffer's room are dropped at enqueue; whatever is
    still queued when the horizon ends is dropped and counted too. The
    whole horizon is measured (the schedule has no stationary regime to
    warm into).
    """
    s, r = _draw_links(config)
    n = config.slots
    half = n // 2
    s_bits = np.log2(1.0 + s[:half]).tolist()
    r_caps = np.log2(1.0 + r[half:]).tolist()

    buf = RelayBuffer(capacity=q_max)
    arr_sum = adm_sum = drop_sum = dep_sum = dep_sq_sum = 0.0
    q_sum = 0.0
    relay_idle = 0
    threshold = (
        config.overflow_threshold if config.overflow_threshold is not None else q_max
    )
    over_slots = 0

    trace = None
    trace_rows = 0
    if config.record_trace:
        trace = np.zeros((min(n, _TRACE_ROW_CAP), len(TRACE_COLUMNS)))

    for i in range(half):
        slot = i + 1
        bits = s_bits[i]
        arr_sum += bits
        admitted, dropped = buf.enqueue(bits, slot)
        adm_sum += admitted
        drop_sum += dropped
        q_sum += buf.q
        if buf.q > threshold:
            over_slots += 1
        if trace is not None and trace_rows < trace.shape[0]:
            trace[trace_rows] = (slot, s[i], r[i], 0, bits, 0.0, buf.q)
            trace_rows += 1

    for i in range(half):
        slot = half + i + 1
        sent = buf.dequeue(r_caps[i], slot)
        dep_sum += sent
        dep_sq_sum += sent * sent
        if sent == 0.0:
            relay_idle += 1
        q_sum += buf.q
        if buf.q > threshold:
            over_slots += 1
        if trace is not None and trace_rows < trace.shape[0]:
            trace[trace_rows] = (slot, s[half + i], r[half + i], 1, 0.0, sent, buf.q)
            trace_rows += 1

    leftover = buf.q
    if leftover > 0.0:
        buf.batches.clear()
        buf.q = 0.0
        buf.dropped_bits += leftover
        drop_sum += leftover

    return _assemble_metrics(
        n,
        arr_sum,
        adm_sum,
        dep_sum,
        dep_sq_sum,
        drop_sum,
        q_sum,
        math.nan,
        over_slots,
        relay_idle,
        0,
        0,
        half,
        0.0,
        buf,
        0.0,
        0.0,
        trace[:trace_rows] if trace is not None else None,
    )


def run_conventional_finite(config: SimConfig, q_max: float) -> Metrics:
    """Conventional buffered schedule with an explicit buffer cap."""
    if config.policy.protocol != "conv_buffer":
        raise ValueError("run_conventional_finite needs a conv_buffer policy")
    if not q_max >= 0.0:
        raise ValueError(f"q_max must be non-negative (or inf), got {q_max}")
    return _run_conventional_buffer(config, q_max)
