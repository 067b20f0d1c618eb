"""Segment geometry and logical/physical block address arithmetic.

A segment is one metadata block followed by ``data_slots`` data blocks.  A
metadata block spends 48 header bytes, 2 bytes per reserved slot on the
in-flight index area, and 32 bytes per key for the rest, so::

    total_slots = (block_size - 48 - 2 * R) // 32
    data_slots  = total_slots - R

which gives 125 data slots at R=1 and 118 at R=8 for 4 KiB blocks.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property

from .errors import InvalidArgumentError

HEADER_BYTES = 48
KEY_BYTES = 32
INFLIGHT_ENTRY_BYTES = 2
DEFAULT_BLOCK_SIZE = 4096


@dataclass(frozen=True)
class LayoutParams:
    block_size: int = DEFAULT_BLOCK_SIZE
    reserved_slots: int = 8

    def __post_init__(self):
        if self.block_size < 1024 or self.block_size % 16:
            raise InvalidArgumentError("block_size must be a multiple of 16 and >= 1024")
        if self.reserved_slots < 1:
            raise InvalidArgumentError("reserved_slots must be >= 1")
        # Offsets are stored as 16-bit values and counts as 8-bit.
        if self.reserved_slots > 255:
            raise InvalidArgumentError("reserved_slots must fit in one byte")
        if self.data_slots < 1:
            raise InvalidArgumentError(
                f"block_size={self.block_size} leaves no data slots at R={self.reserved_slots}"
            )
        if self.data_slots > 0xFFFF:
            raise InvalidArgumentError("block_size too large for 16-bit in-flight offsets")

    @property
    def total_slots(self) -> int:
        return (self.block_size - HEADER_BYTES - INFLIGHT_ENTRY_BYTES * self.reserved_slots) // KEY_BYTES

    @property
    def data_slots(self) -> int:
        return self.total_slots - self.reserved_slots

    @property
    def segment_blocks(self) -> int:
        """Physical blocks per full segment (metadata block included)."""
        return self.data_slots + 1

    # Byte offsets inside a serialized metadata block.
    @property
    def inflight_offset(self) -> int:
        return HEADER_BYTES

    @cached_property
    def key_table_offset(self) -> int:
        return HEADER_BYTES + INFLIGHT_ENTRY_BYTES * self.reserved_slots

    @cached_property
    def reserved_keys_offset(self) -> int:
        return self.key_table_offset + KEY_BYTES * self.data_slots

    @cached_property
    def used_bytes(self) -> int:
        return self.reserved_keys_offset + KEY_BYTES * self.reserved_slots


class BlockKind(enum.Enum):
    METADATA = "metadata"
    DATA = "data"


@dataclass(frozen=True)
class BlockAddress:
    physical_index: int
    kind: BlockKind
    segment_index: int
    offset_in_segment: int | None = None


def num_data_blocks(n: int, p: LayoutParams) -> int:
    if n < 0:
        raise InvalidArgumentError("size must be non-negative")
    return -(-n // p.block_size)


def num_metadata_blocks(n_db: int, p: LayoutParams) -> int:
    if n_db < 0:
        raise InvalidArgumentError("block count must be non-negative")
    return -(-n_db // p.data_slots)


def encrypted_size(n: int, p: LayoutParams) -> int:
    """Physical stream length in bytes for ``n`` logical bytes."""
    n_db = num_data_blocks(n, p)
    return (n_db + num_metadata_blocks(n_db, p)) * p.block_size


def overhead(n: int, p: LayoutParams) -> int:
    return encrypted_size(n, p) - n


def min_overhead_ratio(p: LayoutParams) -> float:
    return 1.0 / p.data_slots


def logical_to_physical(logical_block: int, p: LayoutParams) -> BlockAddress:
    if logical_block < 0:
        raise InvalidArgumentError("logical block index must be non-negative")
    segment, offset = divmod(logical_block, p.data_slots)
    return BlockAddress(segment * p.segment_blocks + 1 + offset, BlockKind.DATA, segment, offset)


def physical_address(physical_index: int, p: LayoutParams) -> BlockAddress:
    if physical_index < 0:
        raise InvalidArgumentError("physical index must be non-negative")
    segment, pos = divmod(physical_index, p.segment_blocks)
    if pos == 0:
        return BlockAddress(physical_index, BlockKind.METADATA, segment)
    return BlockAddress(physical_index, BlockKind.DATA, segment, pos - 1)


def physical_to_logical(physical_index: int, p: LayoutParams) -> int:
    addr = physical_address(physical_index, p)
    if addr.kind is BlockKind.METADATA:
        raise InvalidArgumentError(f"physical block {physical_index} holds metadata")
    return addr.segment_index * p.data_slots + addr.offset_in_segment


def metadata_physical_index(segment: int, p: LayoutParams) -> int:
    if segment < 0:
        raise InvalidArgumentError("segment index must be non-negative")
    return segment * p.segment_blocks


def data_physical_index(segment: int, offset: int, p: LayoutParams) -> int:
    return segment * p.segment_blocks + 1 + offset
