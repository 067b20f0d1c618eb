"""Read/write/commit/recover state machine over one encrypted object.

Writes are staged per segment and committed in three phases:

1. the segment's metadata block is sealed with the update flag set, the new
   keys in the key table and the previous keys plus their offsets in the
   reserved area;
2. the encrypted data blocks are written;
3. the metadata block is resealed clean.

A commit of ``k`` blocks therefore costs ``k + 2`` block writes, and at most
``R`` blocks (the reserved slot count) go into one commit.  After a crash,
:meth:`LamassuFile.recover` decides for each in-flight block whether the new
or the old key decrypts it, by re-deriving the key from the plaintext.
"""

from __future__ import annotations

import enum
import logging
import os
from dataclasses import dataclass, field
from typing import Callable

from . import crypto, metadata
from .crypto import ZERO_KEY, SecretKeyPair
from .errors import (CrashDetectedError, DataIntegrityError, InvalidArgumentError, LamassuError,
                     MetadataIntegrityError, NotFoundError)
from .layout import BlockKind, LayoutParams, data_physical_index, metadata_physical_index
from .metadata import MetadataBlock, UpdateFlag
from .store import BlockStore, ObjectAttrs
from .timing import LatencyBreakdown, null_section

log = logging.getLogger(__name__)


class IntegrityMode(str, enum.Enum):
    FULL = "full"
    META_ONLY = "meta-only"


@dataclass
class RecoveryReport:
    segments_scanned: int = 0
    segments_midupdate: int = 0
    blocks_resolved_to_new: int = 0
    blocks_resolved_to_old: int = 0
    blocks_unrecoverable: int = 0
    unrecoverable: list[int] = field(default_factory=list)  # logical block numbers

    @property
    def inflight_blocks(self) -> int:
        return self.blocks_resolved_to_new + self.blocks_resolved_to_old + self.blocks_unrecoverable


@dataclass(frozen=True)
class IntegrityFailure:
    physical_index: int
    kind: BlockKind
    segment: int
    logical_block: int | None
    reason: str


@dataclass
class VerifyReport:
    segments_checked: int = 0
    blocks_checked: int = 0
    failures: list[IntegrityFailure] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


class LamassuFile:
    """Handle over one encrypted object.

    A handle is single-writer.  If the store fails mid-commit the handle is
    poisoned; open a fresh one and call :meth:`recover`.
    """

    def __init__(self, store: BlockStore, object_id: str, keys: SecretKeyPair,
                 integrity: IntegrityMode | str = IntegrityMode.FULL,
                 profiler: LatencyBreakdown | None = None,
                 random: crypto.RandomSource = os.urandom,
                 on_commit: Callable[[int, list[int]], None] | None = None):
        attrs = store.get_attrs(object_id)
        if attrs.zone_id != keys.zone_id:
            raise InvalidArgumentError(
                f"object {object_id!r} belongs to zone {attrs.zone_id}, keys are for zone {keys.zone_id}")
        self.store = store
        self.object_id = object_id
        self.keys = keys
        self.layout = LayoutParams(attrs.block_size, attrs.reserved_slots)
        self.integrity = IntegrityMode(integrity)
        self._t = profiler.section if profiler is not None else null_section
        self._random = random
        self._on_commit = on_commit

        self._meta: dict[int, MetadataBlock] = {}
        self._buf_seg: int | None = None
        self._buf: dict[int, bytes] = {}
        self._broken = False
        self.closed = False

        seg_blocks = self.layout.segment_blocks
        self._nseg = -(-store.num_blocks(object_id) // seg_blocks)
        self.logical_size = 0
        # An unreadable final metadata block leaves the size unknown; only
        # verify() and recover() stay usable.
        self._size_error: MetadataIntegrityError | None = None
        if self._nseg:
            try:
                self.logical_size = self._load_meta(self._nseg - 1, allow_midupdate=True).logical_size
            except MetadataIntegrityError as e:
                self._size_error = e
        self._stored_size = self.logical_size

    @classmethod
    def create(cls, store: BlockStore, object_id: str, keys: SecretKeyPair,
               layout: LayoutParams | None = None, **kw) -> "LamassuFile":
        layout = layout or LayoutParams()
        store.create_object(object_id, ObjectAttrs(layout.block_size, layout.reserved_slots, keys.zone_id))
        return cls(store, object_id, keys, **kw)

    @classmethod
    def open(cls, store: BlockStore, object_id: str, keys: SecretKeyPair, **kw) -> "LamassuFile":
        return cls(store, object_id, keys, **kw)

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            self.close()
        else:
            self.closed = True

    # -- metadata plumbing -----------------------------------------------

    @property
    def num_segments(self) -> int:
        return self._nseg

    def _load_meta(self, seg: int, allow_midupdate: bool = False) -> MetadataBlock | None:
        mb = self._meta.get(seg)
        if mb is None:
            if seg >= self._nseg:
                return None
            idx = metadata_physical_index(seg, self.layout)
            with self._t("IO"):
                raw = self.store.read_block(self.object_id, idx)
            with self._t("Decrypt"):
                mb = metadata.open_block(raw, self.keys.outer_key, seg, self.layout)
            self._meta[seg] = mb
        if mb.update_flag is UpdateFlag.MIDUPDATE and not allow_midupdate:
            raise CrashDetectedError(f"segment {seg} is midupdate; recovery required", seg)
        return mb

    def _write_meta(self, seg: int, mb: MetadataBlock) -> None:
        with self._t("Encrypt"):
            raw = metadata.seal(mb, self.keys.outer_key, seg, self.layout, self._random)
        with self._t("IO"):
            self.store.write_block(self.object_id, metadata_physical_index(seg, self.layout), raw)
        self._meta[seg] = mb
        self._nseg = max(self._nseg, seg + 1)

    def _check_usable(self) -> None:
        if self.closed:
            raise LamassuError("file handle is closed")
        if self._broken:
            raise LamassuError("file handle is unusable after a failed commit; reopen and recover")
        if self._size_error is not None:
            raise self._size_error

    # -- data path ---------------------------------------------------------

    def _decrypt_checked(self, ct: bytes, key: bytes, lb: int) -> bytes:
        with self._t("Decrypt"):
            pt = crypto.decrypt_data_block(ct, key)
        if self.integrity is IntegrityMode.FULL:
            with self._t("GetCEKey"):
                again = crypto.block_key(pt, self.keys.inner_key)
            if again != key:
                raise DataIntegrityError(f"logical block {lb} failed its hash check", lb)
        return pt

    def _read_block(self, lb: int) -> bytes:
        seg, off = divmod(lb, self.layout.data_slots)
        if seg == self._buf_seg and off in self._buf:
            return self._buf[off]
        mb = self._load_meta(seg)
        bs = self.layout.block_size
        if mb is None or mb.key_table[off] == ZERO_KEY:
            return bytes(bs)
        with self._t("IO"):
            ct = self.store.read_block(self.object_id, data_physical_index(seg, off, self.layout))
        return self._decrypt_checked(ct, mb.key_table[off], lb)

    def read(self, offset: int, length: int) -> bytes:
        """Read up to ``length`` bytes; short at end of file, empty past it."""
        self._check_usable()
        if offset < 0 or length < 0:
            raise InvalidArgumentError("offset and length must be non-negative")
        end = min(self.logical_size, offset + length)
        if offset >= end:
            return b""
        bs = self.layout.block_size
        first, last = offset // bs, (end - 1) // bs
        data = b"".join(self._read_block(lb) for lb in range(first, last + 1))
        start = offset - first * bs
        return data[start:start + end - offset]

    def write(self, offset: int, data: bytes) -> int:
        self._check_usable()
        if offset < 0:
            raise InvalidArgumentError("offset must be non-negative")
        n = len(data)
        if not n:
            return 0
        bs = self.layout.block_size
        view = memoryview(data)
        end = offset + n
        pos = offset
        while pos < end:
            lb, within = divmod(pos, bs)
            take = min(bs - within, end - pos)
            chunk = view[pos - offset:pos - offset + take]
            if take == bs:
                block = bytes(chunk)
            else:
                # Partial block: merge into the existing content (zero padded).
                merged = bytearray(self._read_block(lb)) if lb * bs < self.logical_size else bytearray(bs)
                merged[within:within + take] = chunk
                block = bytes(merged)
            pos += take
            self._stage(lb, block, pos)
        return n

    def _stage(self, lb: int, block: bytes, new_end: int) -> None:
        seg, off = divmod(lb, self.layout.data_slots)
        if self._buf_seg is not None and self._buf_seg != seg:
            self.flush()
        self._buf_seg = seg
        self._buf[off] = block
        if new_end > self.logical_size:
            self.logical_size = new_end
        if len(self._buf) >= self.layout.reserved_slots:
            self.flush()

    def flush(self) -> None:
        """Commit whatever is buffered."""
        self._check_usable()
        if self._buf:
            seg, entries = self._buf_seg, sorted(self._buf.items())
            self._buf, self._buf_seg = {}, None
            try:
                self.commit_segment(seg, entries)
            except BaseException:
                self._broken = True
                raise

    def close(self) -> None:
        if not self.closed:
            if not self._broken:
                self.flush()
            self.closed = True

    def commit_segment(self, seg: int, entries: list[tuple[int, bytes]]) -> None:
        """Three-phase commit of ``entries`` (offset in segment, plaintext) into ``seg``."""
        k = len(entries)
        if not k:
            return
        p = self.layout
        if k > p.reserved_slots:
            raise InvalidArgumentError(f"a commit holds at most {p.reserved_slots} blocks")
        # Segments skipped by a sparse write get an empty clean metadata block
        # first, so every metadata position inside the stream is sealed.
        for gap in range(self._nseg, seg):
            self._write_meta(gap, MetadataBlock.empty(p, self._stored_size))

        current = self._load_meta(seg) or MetadataBlock.empty(p)
        new_keys, ciphers = [], []
        for off, plain in entries:
            with self._t("GetCEKey"):
                key = crypto.block_key(plain, self.keys.inner_key)
            with self._t("Encrypt"):
                ciphers.append(crypto.encrypt_data_block(plain, key))
            new_keys.append(key)

        pending = current.copy()
        pending.update_flag = UpdateFlag.MIDUPDATE
        pending.inflight_indices = [off for off, _ in entries]
        pending.reserved_keys = [current.key_table[off] for off, _ in entries]
        for (off, _), key in zip(entries, new_keys):
            pending.key_table[off] = key
        pending.logical_size = self.logical_size
        self._write_meta(seg, pending)

        for (off, _), ct in zip(entries, ciphers):
            with self._t("IO"):
                self.store.write_block(self.object_id, data_physical_index(seg, off, p), ct)

        done = pending.copy()
        done.update_flag = UpdateFlag.CLEAN
        done.inflight_indices, done.reserved_keys = [], []
        self._write_meta(seg, done)

        if seg == self._nseg - 1:
            self._stored_size = self.logical_size
        elif self._stored_size != self.logical_size:
            self._persist_size()
        if self._on_commit is not None:
            self._on_commit(seg, [off for off, _ in entries])

    def _persist_size(self) -> None:
        final = self._nseg - 1
        mb = self._load_meta(final).copy()
        mb.logical_size = self.logical_size
        self._write_meta(final, mb)
        self._stored_size = self.logical_size

    def get_logical_size(self) -> int:
        if self._size_error is not None:
            raise self._size_error
        return self.logical_size

    def truncate(self, size: int) -> None:
        """Set the logical size.

        Shrinking zeroes the tail of the new last block and clears the keys of
        every block past it; the orphaned physical blocks stay in place.
        """
        self._check_usable()
        if size < 0:
            raise InvalidArgumentError("size must be non-negative")
        self.flush()
        p = self.layout
        bs = p.block_size
        if size < self.logical_size:
            if size % bs:
                lb = size // bs
                block = bytearray(self._read_block(lb))
                block[size % bs:] = bytes(bs - size % bs)
                self.logical_size = size
                self._stage(lb, bytes(block), size)
                self.flush()
            self.logical_size = size
            first_dead = -(-size // bs)
            for seg in range(self._nseg - 1, first_dead // p.data_slots - 1, -1):
                mb = self._load_meta(seg)
                lo = max(0, first_dead - seg * p.data_slots)
                if any(k != ZERO_KEY for k in mb.key_table[lo:]) or seg == self._nseg - 1:
                    mb = mb.copy()
                    mb.key_table[lo:] = [ZERO_KEY] * (p.data_slots - lo)
                    mb.logical_size = size
                    self._write_meta(seg, mb)
                    if seg == self._nseg - 1:
                        self._stored_size = size
            if self._stored_size != size:
                self._persist_size()
        elif size > self.logical_size:
            self.logical_size = size
            if not self._nseg:
                self._write_meta(0, MetadataBlock.empty(p, size))
                self._stored_size = size
            else:
                self._persist_size()

    # -- recovery and verification ---------------------------------------

    def _try_key(self, ct: bytes | None, key: bytes) -> bool:
        if ct is None or key == ZERO_KEY:
            return False
        with self._t("Decrypt"):
            pt = crypto.decrypt_data_block(ct, key)
        with self._t("GetCEKey"):
            return crypto.block_key(pt, self.keys.inner_key) == key

    def recover(self) -> RecoveryReport:
        """Resolve every midupdate segment and reseal it clean."""
        if self._buf:
            raise LamassuError("recover() needs a handle without buffered writes")
        p = self.layout
        report = RecoveryReport()
        self._meta.clear()
        for seg in range(self._nseg):
            report.segments_scanned += 1
            mb = self._load_meta(seg, allow_midupdate=True)
            if mb.update_flag is UpdateFlag.CLEAN:
                continue
            report.segments_midupdate += 1
            fixed = mb.copy()
            for off, old in zip(mb.inflight_indices, mb.reserved_keys):
                try:
                    ct = self.store.read_block(self.object_id, data_physical_index(seg, off, p))
                except NotFoundError:
                    ct = None
                lb = seg * p.data_slots + off
                if self._try_key(ct, mb.key_table[off]):
                    report.blocks_resolved_to_new += 1
                elif old == ZERO_KEY or self._try_key(ct, old):
                    # A zero old key means the block was unallocated before.
                    fixed.key_table[off] = old
                    report.blocks_resolved_to_old += 1
                else:
                    report.blocks_unrecoverable += 1
                    report.unrecoverable.append(lb)
                    log.warning("segment %d: logical block %d matches neither key", seg, lb)
            fixed.update_flag = UpdateFlag.CLEAN
            fixed.inflight_indices, fixed.reserved_keys = [], []
            self._write_meta(seg, fixed)
        if self._nseg:
            self.logical_size = self._stored_size = self._meta[self._nseg - 1].logical_size
        self._size_error = None
        self._broken = False
        return report

    def verify(self) -> VerifyReport:
        """Authenticate every metadata block and hash-check every data block."""
        if self._buf:
            self.flush()
        p = self.layout
        report = VerifyReport()
        self._meta.clear()
        for seg in range(self._nseg):
            report.segments_checked += 1
            midx = metadata_physical_index(seg, p)
            try:
                mb = self._load_meta(seg, allow_midupdate=True)
            except (MetadataIntegrityError, NotFoundError) as e:
                report.failures.append(IntegrityFailure(midx, BlockKind.METADATA, seg, None, str(e)))
                continue
            if mb.update_flag is UpdateFlag.MIDUPDATE:
                report.failures.append(IntegrityFailure(midx, BlockKind.METADATA, seg, None, "midupdate"))
                continue
            for off, key in enumerate(mb.key_table):
                if key == ZERO_KEY:
                    continue
                lb = seg * p.data_slots + off
                pidx = data_physical_index(seg, off, p)
                report.blocks_checked += 1
                try:
                    ct = self.store.read_block(self.object_id, pidx)
                except NotFoundError:
                    report.failures.append(IntegrityFailure(pidx, BlockKind.DATA, seg, lb, "missing"))
                    continue
                if not self._try_key(ct, key):
                    report.failures.append(IntegrityFailure(pidx, BlockKind.DATA, seg, lb, "hash mismatch"))
        return report


def get_logical_size(store: BlockStore, object_id: str, keys: SecretKeyPair) -> int:
    """Logical size as recorded in the object's final metadata block."""
    return LamassuFile.open(store, object_id, keys).get_logical_size()
