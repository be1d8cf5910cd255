import math

import pytest
from hypothesis import given, settings, strategies as st

from bufrelay.relay_buffer import RelayBuffer, mean_delay_little


class TestEnqueue:
    def test_unlimited(self):
        buf = RelayBuffer()
        buf.enqueue(2.0, 1)
        admitted, dropped = buf.enqueue(1.5, 2)
        assert (admitted, dropped) == (1.5, 0.0)
        assert buf.q == pytest.approx(3.5)

    def test_partial_admission(self):
        buf = RelayBuffer(capacity=10.0)
        buf.enqueue(9.5, 1)
        admitted, dropped = buf.enqueue(2.0, 2)
        assert admitted == pytest.approx(0.5)
        assert dropped == pytest.approx(1.5)
        assert buf.q == pytest.approx(10.0)
        assert buf.dropped_bits == pytest.approx(1.5)

    def test_zero_bits_noop(self):
        buf = RelayBuffer()
        assert buf.enqueue(0.0, 1) == (0.0, 0.0)
        assert buf.q == 0.0
        assert len(buf.batches) == 0


class TestDequeue:
    def test_link_limited(self):
        buf = RelayBuffer()
        buf.enqueue(5.0, 1)
        assert buf.dequeue(3.0, 2) == pytest.approx(3.0)
        assert buf.q == pytest.approx(2.0)

    def test_queue_limited(self):
        buf = RelayBuffer()
        buf.enqueue(2.0, 1)
        assert buf.dequeue(3.0, 2) == pytest.approx(2.0)
        assert buf.q == 0.0

    def test_empty_queue_wasted_slot(self):
        buf = RelayBuffer()
        assert buf.dequeue(3.0, 5) == 0.0

    def test_fifo_delay_split(self):
        buf = RelayBuffer()
        buf.enqueue(2.0, 1)
        buf.enqueue(3.0, 2)
        sent = buf.dequeue(4.0, 5)
        assert sent == pytest.approx(4.0)
        # 2 bits waited 4 slots, 2 bits waited 3 slots
        assert buf.departed_bit_slot_product == pytest.approx(2 * 4 + 2 * 3)
        assert buf.mean_departed_delay == pytest.approx(3.5)
        # the split batch keeps its arrival slot
        assert buf.dequeue(10.0, 6) == pytest.approx(1.0)
        assert buf.departed_bit_slot_product == pytest.approx(14 + 1 * 4)


class TestInvariants:
    @given(
        st.lists(
            st.tuples(
                st.floats(0.0, 5.0, allow_nan=False),
                st.floats(0.0, 5.0, allow_nan=False),
            ),
            min_size=1,
            max_size=200,
        ),
        st.floats(1.0, 50.0, allow_nan=False),
    )
    @settings(max_examples=150, deadline=None)
    def test_conservation_and_bounds(self, ops, capacity):
        buf = RelayBuffer(capacity=capacity)
        admitted_total = sent_total = 0.0
        for slot, (bits_in, cap_out) in enumerate(ops, start=1):
            admitted, _ = buf.enqueue(bits_in, slot)
            admitted_total += admitted
            sent_total += buf.dequeue(cap_out, slot)
            assert 0.0 <= buf.q <= capacity + 1e-9
            assert buf.q == pytest.approx(buf.batch_bit_total(), abs=1e-9)
        assert admitted_total - sent_total == pytest.approx(buf.q, abs=1e-9)

    def test_dropped_monotone(self):
        buf = RelayBuffer(capacity=1.0)
        last = 0.0
        for slot in range(1, 20):
            buf.enqueue(0.7, slot)
            assert buf.dropped_bits >= last
            last = buf.dropped_bits


class TestLittlesLaw:
    def test_direct_ratio(self):
        assert mean_delay_little(4.0, 2.0) == pytest.approx(2.0)

    def test_zero_queue(self):
        assert mean_delay_little(0.0, 1.5) == 0.0

    def test_domain_error(self):
        with pytest.raises(ValueError):
            mean_delay_little(1.0, 0.0)
        with pytest.raises(ValueError):
            mean_delay_little(1.0, -2.0)
