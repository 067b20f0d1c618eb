"""Storage-efficiency and crash-injection experiments."""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from ..crypto import SecretKeyPair
from ..engine import LamassuFile
from ..errors import SimulatedCrash
from ..layout import LayoutParams
from ..store import DedupStatsStore, MemoryStore, ObjectAttrs, dedup_report
from .datagen import gen_redundant_file


def store_plain(store, object_id: str, data: bytes, block_size: int) -> None:
    """Write ``data`` unencrypted, block by block (the plaintext baseline)."""
    store.create_object(object_id, ObjectAttrs(block_size, 1, 0))
    pad = -len(data) % block_size
    data = data + bytes(pad)
    for i in range(len(data) // block_size):
        store.write_block(object_id, i, data[i * block_size:(i + 1) * block_size])


def store_encrypted(store, object_id: str, data: bytes, keys: SecretKeyPair, layout: LayoutParams) -> LamassuFile:
    with LamassuFile.create(store, object_id, keys, layout) as f:
        f.write(0, data)
    return f


@dataclass
class DedupRow:
    alpha: float
    reserved_slots: int
    blocks: int
    plain_unique: int
    plain_relative_usage: float
    lamassu_total: int
    lamassu_unique: int
    lamassu_relative_usage: float

    @property
    def relative_overhead(self) -> float:
        """Extra deduplicated space relative to the deduplicated plaintext."""
        return (self.lamassu_unique - self.plain_unique) / self.plain_unique


def dedup_experiment(alphas, reserved_slots: int = 8, size: int = 64 << 20, seed: int = 0,
                     block_size: int = 4096, keys: SecretKeyPair | None = None) -> list[DedupRow]:
    keys = keys or SecretKeyPair.generate()
    layout = LayoutParams(block_size, reserved_slots)
    rows = []
    for alpha in alphas:
        data = gen_redundant_file(size, alpha, seed, block_size)
        plain = DedupStatsStore()
        store_plain(plain, "plain", data, block_size)
        ps = dedup_report(plain)
        enc = DedupStatsStore()
        store_encrypted(enc, "lamassu", data, keys, layout)
        es = dedup_report(enc)
        rows.append(DedupRow(alpha, reserved_slots, ps.total_blocks, ps.unique_blocks, ps.relative_usage,
                             es.total_blocks, es.unique_blocks, es.relative_usage))
    return rows


# -- crash matrix ----------------------------------------------------------

def crash_workload(layout: LayoutParams, file_size: int, seed: int = 0) -> list[tuple[int, bytes]]:
    """Unaligned sequential fill of ``file_size`` bytes, then random overwrites and an append."""
    rng = random.Random(seed)
    bs = layout.block_size
    ops = []
    pos = 0
    while pos < file_size:
        n = min(file_size - pos, rng.randint(bs // 2, 3 * bs))
        ops.append((pos, rng.randbytes(n)))
        pos += n
    for _ in range(max(4, layout.reserved_slots)):
        off = rng.randrange(0, file_size)
        ops.append((off, rng.randbytes(rng.randint(1, 2 * bs))))
    # A multi-block overwrite that spans the segment boundary.
    edge = layout.data_slots * bs - bs - 7
    if 0 <= edge < file_size:
        ops.append((edge, rng.randbytes(min(3 * bs, layout.reserved_slots * bs + 11))))
    ops.append((file_size + 3, rng.randbytes(bs + 5)))
    return ops


def _run(store, keys, layout, ops, on_commit=None) -> None:
    with LamassuFile.create(store, "obj", keys, layout, on_commit=on_commit) as f:
        for off, data in ops:
            f.write(off, data)


def _content(store, keys) -> bytes:
    f = LamassuFile.open(store, "obj", keys)
    return f.read(0, f.logical_size)


@dataclass
class CrashCase:
    fault_after: int
    crashed: bool
    unrecoverable: int
    verify_failures: int
    bad_blocks: list[int]
    size_ok: bool

    @property
    def ok(self) -> bool:
        return not (self.unrecoverable or self.verify_failures or self.bad_blocks) and self.size_ok


@dataclass
class CrashMatrixReport:
    reserved_slots: int
    file_size: int
    total_writes: int
    commits: int
    cases: list[CrashCase] = field(default_factory=list)

    @property
    def failures(self) -> list[CrashCase]:
        return [c for c in self.cases if not c.ok]

    @property
    def resolved(self) -> int:
        return sum(c.crashed for c in self.cases)


def _blocks_match(got: bytes, pre: bytes, post: bytes, bs: int) -> list[int]:
    n = max(len(got), len(pre), len(post))
    n += -n % bs
    got, pre, post = (x.ljust(n, b"\0") for x in (got, pre, post))
    bad = []
    for i in range(0, n, bs):
        g = got[i:i + bs]
        if g != pre[i:i + bs] and g != post[i:i + bs]:
            bad.append(i // bs)
    return bad


def crash_matrix(file_size: int | None = None, reserved_slots: int = 8, block_size: int = 4096,
                 seed: int = 0, keys: SecretKeyPair | None = None) -> CrashMatrixReport:
    """Inject a crash before every write index of a workload and check recovery.

    A fault-free reference run records the store state after each commit.
    For a crash during commit ``c`` every block must afterwards read back as
    its content either before or after ``c``, with nothing unrecoverable.
    The default workload spans two segments.
    """
    layout = LayoutParams(block_size, reserved_slots)
    keys = keys or SecretKeyPair.generate()
    if file_size is None:
        file_size = (layout.data_slots + layout.data_slots // 2) * block_size + 100
    ops = crash_workload(layout, file_size, seed)

    ref = MemoryStore()
    ends, snaps = [], []

    def record(seg, offsets):
        ends.append(ref.writes)
        snaps.append(ref.snapshot())

    _run(ref, keys, layout, ops, on_commit=record)
    states = [b""] + [_content(s, keys) for s in snaps]
    total = ref.writes

    report = CrashMatrixReport(reserved_slots, file_size, total, len(ends))
    c = 0
    for w in range(total + 1):
        while c < len(ends) and ends[c] <= w:
            c += 1
        pre, post = (states[c], states[c + 1]) if c < len(ends) else (states[-1], states[-1])
        store = MemoryStore()
        store.inject_fault(w)
        crashed = False
        try:
            _run(store, keys, layout, ops)
        except SimulatedCrash:
            crashed = True
        store.reset_fault()
        f = LamassuFile.open(store, "obj", keys)
        rec = f.recover()
        ver = f.verify()
        got = f.read(0, f.logical_size)
        report.cases.append(CrashCase(
            w, crashed, rec.blocks_unrecoverable, len(ver.failures),
            _blocks_match(got, pre, post, block_size), len(got) in (len(pre), len(post))))
    return report
