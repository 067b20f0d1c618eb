"""Fixed-block persistence beneath the file engine.

Every store addresses an object as a flat sequence of equally sized blocks.
Single-block writes are atomic: a block either holds a complete previously
written value or is absent.  All stores count writes and carry a fault hook
that simulates a crash after a chosen number of successful writes.
"""

from __future__ import annotations

import hashlib
import os
import re
import struct
import threading
from abc import ABC, abstractmethod
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from .errors import AlreadyExistsError, FormatError, InvalidArgumentError, NotFoundError, SimulatedCrash

FORMAT_VERSION = 1
HEADER_MAGIC = b"LMS1"
HEADER_BYTES = 64
_HEADER = struct.Struct(">4sIIQI")


@dataclass(frozen=True)
class ObjectAttrs:
    block_size: int
    reserved_slots: int
    zone_id: int
    format_version: int = FORMAT_VERSION


def pack_header(attrs: ObjectAttrs) -> bytes:
    raw = _HEADER.pack(HEADER_MAGIC, attrs.block_size, attrs.reserved_slots,
                       attrs.zone_id, attrs.format_version)
    return raw.ljust(HEADER_BYTES, b"\0")


def unpack_header(raw: bytes) -> ObjectAttrs:
    if len(raw) != HEADER_BYTES:
        raise FormatError(f"object header must be {HEADER_BYTES} bytes, got {len(raw)}")
    magic, bs, r, zone, version = _HEADER.unpack_from(raw)
    if magic != HEADER_MAGIC:
        raise FormatError(f"bad object header magic {magic!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version}")
    return ObjectAttrs(bs, r, zone, version)


class BlockStore(ABC):
    def __init__(self):
        self._lock = threading.Lock()
        self.writes = 0
        self.reads = 0
        self._fail_after: int | None = None
        self._crashed = False

    # -- fault hook ------------------------------------------------------

    def inject_fault(self, after_n_writes: int) -> None:
        """Fail the (n+1)-th write from now, and every write after it until reset."""
        if after_n_writes < 0:
            raise InvalidArgumentError("after_n_writes must be >= 0")
        with self._lock:
            self._fail_after = after_n_writes
            self._crashed = False

    def reset_fault(self) -> None:
        with self._lock:
            self._fail_after = None
            self._crashed = False

    @property
    def crashed(self) -> bool:
        return self._crashed

    def reset_counters(self) -> None:
        with self._lock:
            self.writes = 0
            self.reads = 0

    # -- public API --------------------------------------------------------

    def write_block(self, object_id: str, index: int, data: bytes) -> None:
        attrs = self.get_attrs(object_id)
        if len(data) != attrs.block_size:
            raise InvalidArgumentError(f"block must be {attrs.block_size} bytes, got {len(data)}")
        if index < 0:
            raise InvalidArgumentError("block index must be non-negative")
        with self._lock:
            if self._crashed:
                raise SimulatedCrash("store is in a crashed state")
            if self._fail_after is not None:
                if self._fail_after == 0:
                    self._crashed = True
                    raise SimulatedCrash(f"injected crash before write to {object_id}[{index}]")
                self._fail_after -= 1
            self.writes += 1
        self._write(object_id, index, bytes(data))

    def read_block(self, object_id: str, index: int) -> bytes:
        with self._lock:
            self.reads += 1
        return self._read(object_id, index)

    def has_block(self, object_id: str, index: int) -> bool:
        try:
            self._read(object_id, index)
        except NotFoundError:
            return False
        return True

    @abstractmethod
    def create_object(self, object_id: str, attrs: ObjectAttrs) -> None: ...

    @abstractmethod
    def get_attrs(self, object_id: str) -> ObjectAttrs: ...

    @abstractmethod
    def exists(self, object_id: str) -> bool: ...

    @abstractmethod
    def num_blocks(self, object_id: str) -> int:
        """Length of the physical block stream (highest written index + 1)."""

    @abstractmethod
    def objects(self) -> list[str]: ...

    @abstractmethod
    def _write(self, object_id: str, index: int, data: bytes) -> None: ...

    @abstractmethod
    def _read(self, object_id: str, index: int) -> bytes: ...

    def iter_blocks(self, object_id: str) -> Iterator[tuple[int, bytes]]:
        for i in range(self.num_blocks(object_id)):
            try:
                yield i, self._read(object_id, i)
            except NotFoundError:
                continue


class MemoryStore(BlockStore):
    def __init__(self):
        super().__init__()
        self._attrs: dict[str, ObjectAttrs] = {}
        self._blocks: dict[str, dict[int, bytes]] = {}

    def create_object(self, object_id, attrs):
        if object_id in self._attrs:
            raise AlreadyExistsError(f"object {object_id!r} already exists")
        self._attrs[object_id] = attrs
        self._blocks[object_id] = {}

    def get_attrs(self, object_id):
        try:
            return self._attrs[object_id]
        except KeyError:
            raise NotFoundError(f"no such object {object_id!r}") from None

    def exists(self, object_id):
        return object_id in self._attrs

    def num_blocks(self, object_id):
        self.get_attrs(object_id)
        blocks = self._blocks[object_id]
        return max(blocks) + 1 if blocks else 0

    def objects(self):
        return sorted(self._attrs)

    def _write(self, object_id, index, data):
        self._blocks[object_id][index] = data

    def _read(self, object_id, index):
        self.get_attrs(object_id)
        try:
            return self._blocks[object_id][index]
        except KeyError:
            raise NotFoundError(f"{object_id}[{index}] was never written") from None

    def iter_blocks(self, object_id):
        self.get_attrs(object_id)
        yield from sorted(self._blocks[object_id].items())

    def snapshot(self) -> "MemoryStore":
        """Copy of the stored blocks and attributes, with fresh counters."""
        other = MemoryStore()
        other._attrs = dict(self._attrs)
        other._blocks = {k: dict(v) for k, v in self._blocks.items()}
        return other

    def corrupt(self, object_id: str, index: int, bit: int) -> None:
        """Flip one bit of a stored block in place, bypassing counters and faults."""
        block = bytearray(self._read(object_id, index))
        block[bit // 8] ^= 1 << (bit % 8)
        self._blocks[object_id][index] = bytes(block)


_OBJECT_NAME = re.compile(r"^[A-Za-z0-9_.-]+$")


class DirectoryStore(BlockStore):
    """Objects as raw block-stream files plus a 64-byte ``<object>.lmh`` header.

    Blocks are written with a single ``pwrite`` each; a sparse hole inside the
    stream reads back as zeros.
    """

    HEADER_SUFFIX = ".lmh"

    def __init__(self, root: str | os.PathLike, fsync: bool = False):
        super().__init__()
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.fsync = fsync
        self._attr_cache: dict[str, ObjectAttrs] = {}

    def _path(self, object_id: str) -> Path:
        if not _OBJECT_NAME.match(object_id) or object_id.endswith(self.HEADER_SUFFIX):
            raise InvalidArgumentError(f"invalid object name {object_id!r}")
        return self.root / object_id

    def _header_path(self, object_id: str) -> Path:
        return self._path(object_id).with_name(object_id + self.HEADER_SUFFIX)

    def create_object(self, object_id, attrs):
        hp = self._header_path(object_id)
        if hp.exists():
            raise AlreadyExistsError(f"object {object_id!r} already exists")
        self._path(object_id).write_bytes(b"")
        hp.write_bytes(pack_header(attrs))
        self._attr_cache[object_id] = attrs

    def get_attrs(self, object_id):
        attrs = self._attr_cache.get(object_id)
        if attrs is None:
            try:
                raw = self._header_path(object_id).read_bytes()
            except FileNotFoundError:
                raise NotFoundError(f"no such object {object_id!r}") from None
            attrs = self._attr_cache[object_id] = unpack_header(raw)
        return attrs

    def exists(self, object_id):
        return self._header_path(object_id).exists()

    def num_blocks(self, object_id):
        bs = self.get_attrs(object_id).block_size
        return self._path(object_id).stat().st_size // bs

    def objects(self):
        return sorted(p.name[: -len(self.HEADER_SUFFIX)] for p in self.root.glob("*" + self.HEADER_SUFFIX))

    def _write(self, object_id, index, data):
        fd = os.open(self._path(object_id), os.O_WRONLY)
        try:
            os.pwrite(fd, data, index * len(data))
            if self.fsync:
                os.fsync(fd)
        finally:
            os.close(fd)

    def _read(self, object_id, index):
        bs = self.get_attrs(object_id).block_size
        with open(self._path(object_id), "rb") as f:
            f.seek(index * bs)
            data = f.read(bs)
        if len(data) != bs:
            raise NotFoundError(f"{object_id}[{index}] is past the end of the stream")
        return data


@dataclass(frozen=True)
class DedupStats:
    total_blocks: int
    unique_blocks: int
    block_size: int

    @property
    def logical_bytes(self) -> int:
        return self.total_blocks * self.block_size

    @property
    def deduplicated_bytes(self) -> int:
        return self.unique_blocks * self.block_size

    @property
    def relative_usage(self) -> float:
        return self.unique_blocks / self.total_blocks if self.total_blocks else 1.0

    @property
    def savings(self) -> float:
        return 1.0 - self.relative_usage


def fingerprint(block: bytes) -> bytes:
    return hashlib.sha256(block).digest()


def _stats(fingerprints: Iterable[bytes], block_size: int) -> DedupStats:
    counts = Counter(fingerprints)
    return DedupStats(sum(counts.values()), len(counts), block_size)


def dedup_report(store: BlockStore, object_ids: Iterable[str] | None = None) -> DedupStats:
    """Fixed-block, whole-block-equality dedup over the given (default: all) objects."""
    if isinstance(store, DedupStatsStore):
        return store.report(object_ids)
    ids = store.objects() if object_ids is None else list(object_ids)
    sizes = {store.get_attrs(o).block_size for o in ids}
    if len(sizes) > 1:
        raise InvalidArgumentError("objects use different block sizes")
    bs = sizes.pop() if sizes else 0
    return _stats((fingerprint(b) for o in ids for _, b in store.iter_blocks(o)), bs)


class DedupStatsStore(BlockStore):
    """Wrapper modelling a downstream deduplicating controller.

    Writes pass through to ``inner`` and the store keeps a running SHA-256
    fingerprint per stored block so reports do not rescan.
    """

    def __init__(self, inner: BlockStore | None = None):
        super().__init__()
        self.inner = inner if inner is not None else MemoryStore()
        self._fp: dict[str, dict[int, bytes]] = {o: {} for o in self.inner.objects()}
        for o in self._fp:
            for i, b in self.inner.iter_blocks(o):
                self._fp[o][i] = fingerprint(b)

    def create_object(self, object_id, attrs):
        self.inner.create_object(object_id, attrs)
        self._fp[object_id] = {}

    def get_attrs(self, object_id):
        return self.inner.get_attrs(object_id)

    def exists(self, object_id):
        return self.inner.exists(object_id)

    def num_blocks(self, object_id):
        return self.inner.num_blocks(object_id)

    def objects(self):
        return self.inner.objects()

    def _write(self, object_id, index, data):
        self.inner._write(object_id, index, data)
        self._fp[object_id][index] = fingerprint(data)

    def _read(self, object_id, index):
        return self.inner._read(object_id, index)

    def iter_blocks(self, object_id):
        return self.inner.iter_blocks(object_id)

    def report(self, object_ids: Iterable[str] | None = None) -> DedupStats:
        ids = self.objects() if object_ids is None else list(object_ids)
        bs = self.get_attrs(ids[0]).block_size if ids else 0
        return _stats((f for o in ids for f in self._fp[o].values()), bs)
