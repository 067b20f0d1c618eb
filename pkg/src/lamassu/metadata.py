"""Serialization and sealing of per-segment metadata blocks.

Plaintext layout (all integers big-endian)::

    0    16  IV field (12-byte GCM nonce + 4 zero bytes)      clear
    16   32  GCM tag                                          clear
    32   40  logical file size, u64                           encrypted
    40   41  update flag (0 clean, 1 midupdate)
    41   42  in-flight count
    42   48  zero
    48   ..  in-flight offsets, u16 x R
    ..   ..  key table, 32 bytes x data_slots
    ..   ..  reserved (old) keys, 32 bytes x R
    ..   bs  zero fill

Bytes 32..block_size are encrypted as one GCM message whose associated data
is the 8-byte segment index.
"""

from __future__ import annotations

import enum
import os
import struct
from dataclasses import dataclass, field

from . import crypto
from .crypto import IV_FIELD_BYTES, KEY_BYTES, TAG_BYTES, ZERO_KEY
from .errors import FormatError, InvalidArgumentError, MetadataIntegrityError
from .layout import LayoutParams

_SIZE_FLAGS = struct.Struct(">QBB6x")
SEALED_FROM = IV_FIELD_BYTES + TAG_BYTES


class UpdateFlag(enum.IntEnum):
    CLEAN = 0
    MIDUPDATE = 1


@dataclass
class MetadataBlock:
    key_table: list[bytes]
    logical_size: int = 0
    update_flag: UpdateFlag = UpdateFlag.CLEAN
    inflight_indices: list[int] = field(default_factory=list)
    reserved_keys: list[bytes] = field(default_factory=list)
    iv: bytes = bytes(IV_FIELD_BYTES)
    auth_tag: bytes = bytes(TAG_BYTES)

    @classmethod
    def empty(cls, p: LayoutParams, logical_size: int = 0) -> "MetadataBlock":
        return cls(key_table=[ZERO_KEY] * p.data_slots, logical_size=logical_size)

    @property
    def inflight_count(self) -> int:
        return len(self.inflight_indices)

    def copy(self) -> "MetadataBlock":
        return MetadataBlock(
            key_table=list(self.key_table),
            logical_size=self.logical_size,
            update_flag=self.update_flag,
            inflight_indices=list(self.inflight_indices),
            reserved_keys=list(self.reserved_keys),
            iv=self.iv,
            auth_tag=self.auth_tag,
        )

    def validate(self, p: LayoutParams) -> None:
        if len(self.key_table) != p.data_slots:
            raise InvalidArgumentError(f"key table must have {p.data_slots} entries")
        if any(len(k) != KEY_BYTES for k in self.key_table + self.reserved_keys):
            raise InvalidArgumentError("keys must be 32 bytes")
        if not 0 <= self.logical_size < 2**64:
            raise InvalidArgumentError("logical size out of range")
        if len(self.iv) != IV_FIELD_BYTES or len(self.auth_tag) != TAG_BYTES:
            raise InvalidArgumentError("bad iv or tag length")
        n = len(self.inflight_indices)
        if n > p.reserved_slots:
            raise InvalidArgumentError(f"at most {p.reserved_slots} in-flight blocks")
        if len(self.reserved_keys) != n:
            raise InvalidArgumentError("one reserved key per in-flight index")
        if len(set(self.inflight_indices)) != n:
            raise InvalidArgumentError("in-flight indices must be distinct")
        if any(not 0 <= i < p.data_slots for i in self.inflight_indices):
            raise InvalidArgumentError("in-flight index outside the key table")
        if self.update_flag is UpdateFlag.CLEAN and n:
            raise InvalidArgumentError("a clean block carries no in-flight entries")


def serialize(mb: MetadataBlock, p: LayoutParams) -> bytes:
    mb.validate(p)
    R = p.reserved_slots
    out = bytearray(p.block_size)
    out[0:16] = mb.iv
    out[16:32] = mb.auth_tag
    out[32:48] = _SIZE_FLAGS.pack(mb.logical_size, int(mb.update_flag), mb.inflight_count)
    idx = list(mb.inflight_indices) + [0] * (R - mb.inflight_count)
    out[p.inflight_offset:p.key_table_offset] = struct.pack(f">{R}H", *idx)
    out[p.key_table_offset:p.reserved_keys_offset] = b"".join(mb.key_table)
    reserved = list(mb.reserved_keys) + [ZERO_KEY] * (R - mb.inflight_count)
    out[p.reserved_keys_offset:p.used_bytes] = b"".join(reserved)
    return bytes(out)


def deserialize(data: bytes, p: LayoutParams) -> MetadataBlock:
    if len(data) != p.block_size:
        raise InvalidArgumentError(f"metadata block must be {p.block_size} bytes")
    R = p.reserved_slots
    size, flag, count, = _SIZE_FLAGS.unpack_from(data, 32)
    try:
        flag = UpdateFlag(flag)
    except ValueError:
        raise FormatError(f"unknown update flag {flag}") from None
    if count > R or (flag is UpdateFlag.CLEAN and count):
        raise FormatError(f"bad in-flight count {count}")
    idx = struct.unpack_from(f">{R}H", data, p.inflight_offset)[:count]
    if len(set(idx)) != count or any(i >= p.data_slots for i in idx):
        raise FormatError("bad in-flight indices")
    kt = p.key_table_offset
    keys = [data[kt + i * KEY_BYTES:kt + (i + 1) * KEY_BYTES] for i in range(p.data_slots)]
    rk = p.reserved_keys_offset
    reserved = [data[rk + i * KEY_BYTES:rk + (i + 1) * KEY_BYTES] for i in range(count)]
    return MetadataBlock(
        key_table=keys,
        logical_size=size,
        update_flag=flag,
        inflight_indices=list(idx),
        reserved_keys=reserved,
        iv=data[0:16],
        auth_tag=data[16:32],
    )


def _aad(segment_index: int) -> bytes:
    return segment_index.to_bytes(8, "big")


def seal(mb: MetadataBlock, outer_key: bytes, segment_index: int, p: LayoutParams,
         random: crypto.RandomSource = os.urandom) -> bytes:
    """Encrypt a metadata block into its on-disk form under a fresh IV.

    ``mb.iv`` and ``mb.auth_tag`` are updated to the values written.
    """
    plain = serialize(mb, p)
    iv = crypto.new_iv(random)
    cipher, tag = crypto.encrypt_metadata(plain[SEALED_FROM:], outer_key, iv, _aad(segment_index))
    mb.iv, mb.auth_tag = iv, tag
    return iv + tag + cipher


def open_block(disk_bytes: bytes, outer_key: bytes, segment_index: int, p: LayoutParams) -> MetadataBlock:
    """Authenticate and decode an on-disk metadata block."""
    if len(disk_bytes) != p.block_size:
        raise InvalidArgumentError(f"metadata block must be {p.block_size} bytes")
    iv, tag = disk_bytes[:16], disk_bytes[16:32]
    # The nonce pad sits outside GCM's coverage, so check it by hand.
    if any(iv[crypto.GCM_NONCE_BYTES:]):
        raise MetadataIntegrityError("nonzero IV padding", segment_index)
    try:
        plain = crypto.decrypt_metadata(disk_bytes[SEALED_FROM:], outer_key, iv, tag, _aad(segment_index))
    except MetadataIntegrityError:
        raise MetadataIntegrityError(
            f"metadata block of segment {segment_index} failed authentication", segment_index
        ) from None
    try:
        return deserialize(iv + tag + plain, p)
    except FormatError as e:
        raise FormatError(f"segment {segment_index}: {e}", segment_index) from None
