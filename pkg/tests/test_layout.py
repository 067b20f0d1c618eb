import pytest
from hypothesis import given, strategies as st

from lamassu.errors import InvalidArgumentError
from lamassu.layout import (BlockKind, LayoutParams, encrypted_size, logical_to_physical,
                            metadata_physical_index, min_overhead_ratio, num_data_blocks,
                            num_metadata_blocks, physical_address, physical_to_logical)

L1 = LayoutParams(4096, 1)
L8 = LayoutParams(4096, 8)


def test_published_slot_counts():
    assert L1.data_slots == 125
    assert L8.data_slots == 118


@pytest.mark.parametrize("n, expected", [(0, 0), (1, 1), (4096, 1), (4097, 2), (4096 * 125, 125)])
def test_num_data_blocks(n, expected):
    assert num_data_blocks(n, L1) == expected


@pytest.mark.parametrize("layout, n_db, expected", [(L1, 0, 0), (L1, 125, 1), (L1, 126, 2),
                                                     (L8, 118, 1), (L8, 119, 2)])
def test_num_metadata_blocks(layout, n_db, expected):
    assert num_metadata_blocks(n_db, layout) == expected


def test_encrypted_size_examples():
    assert encrypted_size(0, L1) == 0
    assert encrypted_size(1, L1) == 8192
    assert encrypted_size(4096 * 125, L1) == 4096 * 126
    assert (encrypted_size(4096 * 125, L1) - 4096 * 125) / (4096 * 125) == pytest.approx(0.008)


def test_min_overhead_ratio():
    assert min_overhead_ratio(L1) == pytest.approx(0.008)
    assert min_overhead_ratio(L8) == pytest.approx(1 / 118)
    assert round(100 * min_overhead_ratio(L8), 2) == 0.85
    # 48 + 2*60 + 32*(1+60) = 2120 <= 2120, exactly one data slot.
    assert LayoutParams(2128, 60).data_slots == 1
    assert min_overhead_ratio(LayoutParams(2128, 60)) == 1.0


def test_invalid_params():
    with pytest.raises(InvalidArgumentError):
        LayoutParams(1000, 1)
    with pytest.raises(InvalidArgumentError):
        LayoutParams(4096, 0)
    with pytest.raises(InvalidArgumentError):
        LayoutParams(1024, 32)


def test_address_examples():
    a = logical_to_physical(0, L8)
    assert (a.physical_index, a.segment_index, a.kind) == (1, 0, BlockKind.DATA)
    a = logical_to_physical(118, L8)
    assert (a.physical_index, a.segment_index, a.offset_in_segment) == (120, 1, 0)
    assert physical_address(119, L8).kind is BlockKind.METADATA
    assert metadata_physical_index(0, L8) == 0
    assert metadata_physical_index(1, L8) == 119
    assert metadata_physical_index(2, L1) == 252


def test_address_bijection_up_to_a_million():
    p = L8
    prev = 0
    for k in range(1_000_000):
        phys = logical_to_physical(k, p).physical_index
        assert phys % p.segment_blocks != 0
        assert phys > prev or k == 0
        prev = phys
        assert physical_to_logical(phys, p) == k


def test_metadata_index_is_not_logical():
    with pytest.raises(InvalidArgumentError):
        physical_to_logical(119, L8)


@given(st.integers(0, 10**9), st.sampled_from([L1, L8, LayoutParams(1024, 2)]))
def test_size_formula_properties(n, p):
    size = encrypted_size(n, p)
    assert size % p.block_size == 0
    assert encrypted_size(n + 1, p) >= size
    if n:
        assert size - n >= p.block_size
    if n % (p.block_size * p.data_slots) == 0:
        assert size - n == n // p.data_slots
