import itertools

import pytest
from hypothesis import given, strategies as st

from commcost.errors import LayoutError
from commcost.params import Locality
from commcost.topology import (
    CubeTopology,
    RankLayout,
    average_hops,
    cube_side,
    hops,
    locality,
)


def brute_force_average_hops(side: int) -> float:
    """Mean Manhattan distance over all ordered coordinate pairs, self included."""
    coords = list(itertools.product(range(side), repeat=3))
    total = sum(hops(a, b) for a in coords for b in coords)
    return total / len(coords) ** 2


class TestLocality:
    def setup_method(self):
        self.layout = RankLayout.block(64, 16, 2)

    def test_same_socket(self):
        assert locality(0, 1, self.layout) is Locality.INTRA_SOCKET

    def test_same_node_other_socket(self):
        assert locality(0, 8, self.layout) is Locality.INTRA_NODE

    def test_other_node(self):
        assert locality(0, 16, self.layout) is Locality.INTER_NODE

    @given(src=st.integers(0, 63), dst=st.integers(0, 63))
    def test_symmetric(self, src, dst):
        layout = RankLayout.block(64, 16, 2)
        assert locality(src, dst, layout) is locality(dst, src, layout)

    def test_rank_out_of_range(self):
        with pytest.raises(LayoutError, match="out of range"):
            locality(0, 64, self.layout)


class TestRankLayout:
    def test_block_assignment(self):
        layout = RankLayout.block(32, 16, 2)
        assert layout.node_of(0) == 0
        assert layout.node_of(17) == 1
        assert layout.socket_of(7) == 0
        assert layout.socket_of(8) == 1
        assert layout.num_nodes == 2

    def test_ppn_must_divide_into_sockets(self):
        with pytest.raises(LayoutError):
            RankLayout.block(30, 15, 2)

    def test_explicit_assignment(self):
        layout = RankLayout.from_assignment([(0, 0), (1, 0), (0, 1), (1, 1)])
        assert layout.nprocs == 4
        assert layout.ppn == 2
        assert layout.sockets_per_node == 2
        assert locality(0, 2, layout) is Locality.INTRA_NODE
        assert locality(0, 1, layout) is Locality.INTER_NODE

    def test_from_file(self):
        text = "0 0 0\n1 0 1\n2 1 0\n"
        layout = RankLayout.from_file(text)
        assert layout.nprocs == 3
        assert layout.node_of(2) == 1
        assert locality(0, 1, layout) is Locality.INTRA_NODE

    def test_from_file_duplicate_rank(self):
        with pytest.raises(LayoutError, match="line 2"):
            RankLayout.from_file("0 0 0\n0 0 1\n")

    def test_from_file_not_dense(self):
        with pytest.raises(LayoutError, match="missing"):
            RankLayout.from_file("0 0 0\n2 0 0\n")

    def test_from_file_garbage(self):
        with pytest.raises(LayoutError, match="line 1"):
            RankLayout.from_file("zero one two\n")

    def test_from_file_wrong_field_count(self):
        with pytest.raises(LayoutError, match="line 1"):
            RankLayout.from_file("0 0\n")


class TestCubeSide:
    @pytest.mark.parametrize("n,side", [(1, 1), (8, 2), (9, 3)])
    def test_pinned(self, n, side):
        assert cube_side(n) == side

    @pytest.mark.parametrize("c", range(1, 11))
    def test_exact_and_one_past(self, c):
        assert cube_side(c**3) == c
        assert cube_side(c**3 + 1) == c + 1

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            cube_side(0)


class TestHops:
    def test_zero_for_same_point(self):
        assert hops((1, 2, 3), (1, 2, 3)) == 0

    def test_manhattan(self):
        assert hops((0, 0, 0), (1, 1, 0)) == 2
        assert hops((0, 0, 0), (2, 1, 1)) == 4

    @given(
        pts=st.tuples(
            *(st.tuples(st.integers(0, 9), st.integers(0, 9), st.integers(0, 9)),) * 3
        )
    )
    def test_triangle_inequality(self, pts):
        a, b, c = pts
        assert hops(a, c) <= hops(a, b) + hops(b, c)


class TestAverageHops:
    def test_single_router(self):
        assert average_hops(CubeTopology(1)) == 0.0

    def test_pinned_values(self):
        assert average_hops(CubeTopology(2)) == 1.5
        assert average_hops(CubeTopology(3)) == 8 / 3

    @pytest.mark.parametrize("side", range(1, 6))
    def test_closed_form_matches_enumeration(self, side):
        assert average_hops(CubeTopology(side)) == brute_force_average_hops(side)

    def test_from_geminis(self):
        assert CubeTopology.from_geminis(4).side == 2

    def test_from_layout(self):
        layout = RankLayout.block(128, 16, 2)  # 8 nodes, 4 routers
        assert CubeTopology.from_layout(layout).side == 2

    def test_invalid_side(self):
        with pytest.raises(LayoutError):
            CubeTopology(0)
