import math

import pytest
from hypothesis import given, strategies as st

from commcost.cost import (
    CostBreakdown,
    MessageSpec,
    contention_cost,
    link_bytes,
    max_rate_cost,
    message_cost,
    postal_cost,
    predict_pattern,
    queue_search_cost,
)
from commcost.errors import PatternError
from commcost.params import CELLS, Locality, ParamSet, Protocol, default_model
from commcost.pattern import CommPattern
from commcost.topology import CubeTopology, RankLayout

MODEL = default_model()
EAGER_SOCKET = MODEL.cell(Protocol.EAGER, Locality.INTRA_SOCKET)
REND_INTER = MODEL.cell(Protocol.RENDEZVOUS, Locality.INTER_NODE)

rates = st.floats(1e6, 1e12, allow_nan=False, allow_infinity=False)
sizes = st.integers(0, 10**8)


def check_breakdown(bd: CostBreakdown) -> None:
    assert bd.transport >= 0 and bd.queue >= 0 and bd.contention >= 0
    assert bd.total == bd.transport + bd.queue + bd.contention


class TestPostal:
    def test_zero_bytes_is_alpha_exactly(self):
        assert postal_cost(0, EAGER_SOCKET) == EAGER_SOCKET.alpha

    def test_eager_intra_socket_1k(self):
        assert postal_cost(1024, EAGER_SOCKET) == pytest.approx(8.5e-7, rel=1e-12)

    def test_linear_without_latency(self):
        p = ParamSet(alpha=0.0, rb=1e9)
        assert postal_cost(2048, p) == 2 * postal_cost(1024, p)

    @given(s1=sizes, s2=sizes, rb=rates)
    def test_nondecreasing_in_size(self, s1, s2, rb):
        p = ParamSet(alpha=1e-6, rb=rb)
        lo, hi = sorted((s1, s2))
        assert postal_cost(lo, p) <= postal_cost(hi, p)

    def test_negative_size_rejected(self):
        with pytest.raises(ValueError):
            postal_cost(-1, EAGER_SOCKET)


class TestMaxRate:
    def test_rendezvous_inter_node_16ppn(self):
        expected = 3.0e-6 + 1.6e7 / 6.6e9
        assert max_rate_cost(10**6, 16, REND_INTER) == pytest.approx(expected, rel=1e-12)

    def test_single_pair_reduces_to_postal_bitwise(self):
        for cell in CELLS:
            p = MODEL.params[cell]
            for size in (0, 1, 128, 8192, 10**6):
                assert max_rate_cost(size, 1, p) == postal_cost(size, p)

    def test_injection_bound_pinned(self):
        p = ParamSet(alpha=0.0, rb=1e9, rn=1e9)
        assert max_rate_cost(10**6, 2, p) == pytest.approx(2e-3, rel=1e-12)

    @given(size=sizes, ppn=st.integers(1, 64), rb=rates, headroom=st.floats(1.0, 8.0))
    def test_reduction_is_bitwise(self, size, ppn, rb, headroom):
        p = ParamSet(alpha=1e-6, rb=rb, rn=(ppn * rb) * headroom)
        assert max_rate_cost(size, ppn, p) == postal_cost(size, p)

    @given(size=sizes, p1=st.integers(1, 64), p2=st.integers(1, 64), rb=rates, rn=rates)
    def test_nondecreasing_in_ppn(self, size, p1, p2, rb, rn):
        p = ParamSet(alpha=1e-6, rb=rb, rn=rn)
        lo, hi = sorted((p1, p2))
        assert max_rate_cost(size, lo, p) <= max_rate_cost(size, hi, p) * (1 + 1e-12)

    def test_bad_ppn_rejected(self):
        with pytest.raises(ValueError):
            max_rate_cost(100, 0, REND_INTER)


class TestQueueSearch:
    def test_empty(self):
        assert queue_search_cost(0, 8.4e-9) == 0.0

    def test_ten_thousand_messages(self):
        assert queue_search_cost(10000, 8.4e-9) == pytest.approx(0.84, rel=1e-12)

    @given(n=st.integers(0, 10**5))
    def test_quadratic(self, n):
        gamma = 8.4e-9
        assert queue_search_cost(2 * n, gamma) == pytest.approx(
            4 * queue_search_cost(n, gamma), rel=1e-12, abs=0.0
        )


class TestContention:
    def test_zero(self):
        assert contention_cost(0.0, 1e-10) == 0.0

    def test_pinned(self):
        assert contention_cost(1769472, 1.0e-10) == pytest.approx(1.7695e-4, rel=1e-4)

    @given(ell=st.floats(0, 1e12, allow_nan=False))
    def test_linear(self, ell):
        assert contention_cost(2 * ell, 1e-10) == pytest.approx(
            2 * contention_cost(ell, 1e-10), rel=1e-12, abs=0.0
        )


class TestLinkBytes:
    def test_local_traffic(self):
        assert link_bytes(0.0, 16384, 16) == 0.0

    def test_pinned(self):
        assert link_bytes(1.5, 16384, 16) == 1769472

    def test_unit(self):
        assert link_bytes(1.0, 1.0, 1) == 2.0

    @given(
        h1=st.floats(0, 10, allow_nan=False),
        h2=st.floats(0, 10, allow_nan=False),
        b=st.floats(0, 1e9, allow_nan=False),
        ppn=st.integers(1, 64),
    )
    def test_nondecreasing_in_hops(self, h1, h2, b, ppn):
        lo, hi = sorted((h1, h2))
        assert link_bytes(lo, b, ppn) <= link_bytes(hi, b, ppn)


class TestMessageCost:
    def test_zero_count(self):
        spec = MessageSpec(size=10**6, count=0, locality=Locality.INTER_NODE)
        assert message_cost(spec, 16, MODEL) == 0.0

    def test_single_rendezvous_composition(self):
        spec = MessageSpec(size=10**6, count=1, locality=Locality.INTER_NODE)
        assert message_cost(spec, 16, MODEL) == max_rate_cost(10**6, 16, REND_INTER)

    def test_count_multiplies(self):
        one = message_cost(MessageSpec(10**6, 1, Locality.INTER_NODE), 16, MODEL)
        three = message_cost(MessageSpec(10**6, 3, Locality.INTER_NODE), 16, MODEL)
        assert three == 3 * one

    @given(a=st.integers(0, 1000), b=st.integers(0, 1000), size=st.integers(0, 10**7))
    def test_count_additive(self, a, b, size):
        def cost(count):
            return message_cost(MessageSpec(size, count, Locality.INTER_NODE), 16, MODEL)

        assert cost(a + b) == pytest.approx(cost(a) + cost(b), rel=1e-12, abs=1e-18)

    def test_negative_count_rejected(self):
        with pytest.raises(ValueError):
            MessageSpec(size=8, count=-1, locality=Locality.INTRA_NODE)


class TestPredictPattern:
    def test_empty_pattern_is_all_zero(self):
        pattern = CommPattern(nprocs=4, messages=())
        layout = RankLayout.block(4, 4, 2)
        bd = predict_pattern(pattern, layout, CubeTopology.from_layout(layout), MODEL)
        assert (bd.transport, bd.queue, bd.contention, bd.total) == (0, 0, 0, 0)

    def test_single_eager_intra_socket_message(self):
        pattern = CommPattern(nprocs=2, messages=((0, 1, 1024),))
        layout = RankLayout.block(2, 16, 2)
        bd = predict_pattern(pattern, layout, CubeTopology.from_layout(layout), MODEL)
        assert bd.transport == pytest.approx(8.5e-7, rel=1e-12)
        assert bd.queue == MODEL.gamma
        assert bd.contention == 0.0
        check_breakdown(bd)

    def test_symmetric_exchange_queue_charge(self):
        n = 40
        messages = [(0, 1, 1024)] * n + [(1, 0, 1024)] * n
        pattern = CommPattern(nprocs=2, messages=tuple(messages))
        layout = RankLayout.block(2, 16, 2)
        bd = predict_pattern(pattern, layout, CubeTopology.from_layout(layout), MODEL)
        assert bd.queue == MODEL.gamma * n * n
        check_breakdown(bd)

    def test_on_node_pattern_has_no_contention(self):
        pattern = CommPattern(nprocs=16, messages=((0, 9, 4096), (9, 0, 64)))
        layout = RankLayout.block(16, 16, 2)
        bd = predict_pattern(pattern, layout, CubeTopology.from_geminis(27), MODEL)
        assert bd.contention == 0.0

    def test_inter_node_contention_value(self):
        # 64 ranks exchanging across the node boundary of an 8-node line.
        size = 10**6
        messages = [(i, i + 64, size) for i in range(64)]
        messages += [(i + 64, i, size) for i in range(64)]
        pattern = CommPattern(nprocs=128, messages=tuple(messages))
        layout = RankLayout.block(128, 16, 2)
        topo = CubeTopology.from_geminis(4)
        bd = predict_pattern(pattern, layout, topo, MODEL)
        assert bd.contention == MODEL.delta * link_bytes(1.5, size, 16)
        check_breakdown(bd)

    def test_queue_multiplier_scales_queue_component(self):
        from commcost.params import MachineModel

        scaled = MachineModel(
            params=dict(MODEL.params),
            gamma=MODEL.gamma,
            delta=MODEL.delta,
            thresholds=MODEL.thresholds,
            queue_multiplier=1 / 3,
        )
        pattern = CommPattern(nprocs=2, messages=((0, 1, 1024),) * 9)
        layout = RankLayout.block(2, 16, 2)
        topo = CubeTopology.from_layout(layout)
        base = predict_pattern(pattern, layout, topo, MODEL)
        third = predict_pattern(pattern, layout, topo, scaled)
        assert third.queue == pytest.approx(base.queue / 3, rel=1e-12)

    def test_pattern_larger_than_layout_rejected(self):
        pattern = CommPattern(nprocs=8, messages=((0, 7, 64),))
        layout = RankLayout.block(4, 4, 2)
        with pytest.raises(PatternError):
            predict_pattern(pattern, layout, CubeTopology(1), MODEL)

    @given(
        msgs=st.lists(
            st.tuples(st.integers(0, 15), st.integers(0, 15), st.integers(1, 10**6)),
            max_size=30,
        )
    )
    def test_breakdown_additivity(self, msgs):
        msgs = [(s, d, z) for s, d, z in msgs if s != d]
        pattern = CommPattern(nprocs=16, messages=tuple(msgs))
        layout = RankLayout.block(16, 4, 2)
        bd = predict_pattern(pattern, layout, CubeTopology.from_layout(layout), MODEL)
        check_breakdown(bd)

    def test_negative_component_rejected(self):
        with pytest.raises(ValueError):
            CostBreakdown(transport=-1.0, queue=0.0, contention=0.0)
