"""The relay's queue: fluid bit accounting with per-bit FIFO delay.

Bits are a continuous quantity here (rates, not packets). Arrivals that
would overflow a finite buffer are partially admitted: only the excess is
dropped. Departures drain arrival batches oldest-first, splitting the last
one, which makes the measured mean delay exact rather than sampled - it
doubles as the independent check on Little's law.
"""

from __future__ import annotations

import math
from collections import deque

__all__ = ["RelayBuffer", "mean_delay_little"]


class RelayBuffer:
    """FIFO fluid queue with capacity enforcement and delay accounting."""

    __slots__ = (
        "q",
        "capacity",
        "batches",
        "dropped_bits",
        "departed_bits",
        "departed_bit_slot_product",
    )

    def __init__(self, capacity: float = math.inf):
        # zero capacity is degenerate but well-defined: everything drops
        if not capacity >= 0.0:
            raise ValueError(f"capacity must be non-negative (or inf), got {capacity}")
        self.q = 0.0
        self.capacity = capacity
        self.batches: deque[list] = deque()  # [bits, arrival_slot]
        self.dropped_bits = 0.0
        self.departed_bits = 0.0
        self.departed_bit_slot_product = 0.0

    def enqueue(self, bits: float, slot: int) -> tuple[float, float]:
        """Admit up to the remaining room; returns (admitted, dropped)."""
        if bits <= 0.0:
            return 0.0, 0.0
        room = self.capacity - self.q
        if bits <= room:
            admitted, dropped = bits, 0.0
        else:
            admitted, dropped = room, bits - room
        if admitted > 0.0:
            self.batches.append([admitted, slot])
            self.q += admitted
        if dropped > 0.0:
            self.dropped_bits += dropped
        return admitted, dropped

    def dequeue(self, link_capacity_bits: float, slot: int) -> float:
        """Send min(link capacity, queue) bits; drains batches oldest-first."""
        if link_capacity_bits <= 0.0 or self.q <= 0.0:
            return 0.0
        q = self.q
        if link_capacity_bits >= q:
            # full flush: every batch departs
            transmitted = q
            prod = 0.0
            for bits, arr in self.batches:
                prod += bits * (slot - arr)
            self.batches.clear()
            self.q = 0.0
            self.departed_bits += transmitted
            self.departed_bit_slot_product += prod
            return transmitted
        transmitted = link_capacity_bits
        remaining = transmitted
        batches = self.batches
        prod = 0.0
        while remaining > 0.0 and batches:
            head = batches[0]
            if head[0] <= remaining:
                remaining -= head[0]
                prod += head[0] * (slot - head[1])
                batches.popleft()
            else:
                head[0] -= remaining
                prod += remaining * (slot - head[1])
                remaining = 0.0
        self.q = q - transmitted
        self.departed_bits += transmitted
        self.departed_bit_slot_product += prod
        return transmitted

    @property
    def mean_departed_delay(self) -> float:
        """Bit-weighted mean delay (slots) over everything sent so far."""
        if self.departed_bits <= 0.0:
            return 0.0
        return self.departed_bit_slot_product / self.departed_bits

    def batch_bit_total(self) -> float:
        """Sum of batch contents; equals q up to accumulated rounding."""
        return math.fsum(b[0] for b in self.batches)


def mean_delay_little(mean_queue: float, arrival_rate: float) -> float:
    """Little's law: mean delay in slots = mean queue / arrival rate."""
    if not arrival_rate > 0.0:
        raise ValueError(f"arrival rate must be positive, got {arrival_rate}")
    return mean_queue / arrival_rate
