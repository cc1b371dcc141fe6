"""Block-flow DP: per-dimension dispatch sets and step sequencing."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from swingsim import blockflow
from swingsim.blockflow import (
    build_dimflow,
    ceil_log2,
    dim_sequence,
    embed_product,
    is_power_of_two,
    iter_bits,
)
from swingsim.swing import _swing_rule


@pytest.mark.parametrize(
    "x,expected",
    [(1, 0), (2, 1), (3, 2), (4, 2), (5, 3), (8, 3), (9, 4), (1024, 10)],
)
def test_ceil_log2(x, expected):
    assert ceil_log2(x) == expected


def test_is_power_of_two():
    assert all(is_power_of_two(1 << k) for k in range(12))
    assert not any(is_power_of_two(x) for x in (0, 3, 5, 6, 7, 12, 1023))


def test_iter_bits():
    assert list(iter_bits(0b1011)) == [0, 1, 3]
    assert list(iter_bits(0)) == []


@given(st.integers(min_value=1, max_value=1 << 40))
def test_ceil_log2_bounds(x):
    k = ceil_log2(x)
    assert (1 << k) >= x
    assert k == 0 or (1 << (k - 1)) < x


def test_dim_sequence_round_robin():
    assert dim_sequence([1, 2], 0) == [(0, 0), (1, 0), (1, 1)]
    assert dim_sequence([2, 1], 1) == [(1, 0), (0, 0), (0, 1)]
    # exhausted dims are skipped, not revisited
    assert dim_sequence([1, 3], 0) == [(0, 0), (1, 0), (1, 1), (1, 2)]


def test_dim_sequence_counts_every_step_once():
    seq = dim_sequence([3, 2, 4], 1)
    assert len(seq) == 9
    assert sorted(seq) == [(d, s) for d in range(3) for s in range([3, 2, 4][d])]


def test_dispatch_sets_partition_on_power_of_two():
    """Each rank's per-step sends are disjoint and cover everyone else."""
    for p in (4, 8, 16):
        flow = build_dimflow(p, ceil_log2(p), _swing_rule(p, False))
        for r in range(p):
            union = 0
            for s, mask in enumerate(flow.send[r]):
                assert union & mask == 0
                union |= mask
                assert mask.bit_count() == p >> (s + 1)
            assert union == ((1 << p) - 1) ^ (1 << r)


def test_dispatch_anchor_eight_nodes():
    flow = build_dimflow(8, 3, _swing_rule(8, False))
    assert flow.send[0][0] == 0b01100110
    assert flow.send[0][2] == 0b00001000


def test_dedup_flow_even_non_power_of_two():
    """Deduped flows still cover all peers, without the node's own block."""
    for p in (6, 10, 12, 20):
        flow = build_dimflow(p, ceil_log2(p), _swing_rule(p, False), dedup=True)
        for r in range(p):
            union = 0
            for mask in flow.send[r]:
                assert union & mask == 0
                union |= mask
                assert not mask >> r & 1
            assert union == ((1 << p) - 1) ^ (1 << r)


def test_dedup_anchor_six_nodes():
    flow = build_dimflow(6, 3, _swing_rule(6, False), dedup=True)
    sets = [sorted(iter_bits(mask)) for mask in flow.send[0]]
    assert sets == [[1, 4], [2, 5], [3]]


def test_embed_product_maps_factor_masks_to_rank_masks():
    # 1D embedding is the identity
    assert embed_product([0b1011], [1]) == 0b1011
    # x in {0,2}, y in {0,1} on a 4-wide grid -> ranks {0,2,4,6}
    assert embed_product([0b0101, 0b0011], [1, 4]) == 0b01010101
    assert embed_product([0b0001, 0b0001], [1, 4]) == 0b1
