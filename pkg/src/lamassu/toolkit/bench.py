"""FIO-style workloads against the in-memory store.

Throughput is informational only.  The backend write count is exact and
deterministic for a given (workload, R, seed), which is what tests assert.
"""

from __future__ import annotations

import enum
import random
import time
from dataclasses import dataclass, field

from ..crypto import SecretKeyPair
from ..engine import IntegrityMode, LamassuFile
from ..layout import LayoutParams
from ..store import MemoryStore, ObjectAttrs
from ..timing import LatencyBreakdown


class Workload(str, enum.Enum):
    SEQ_READ = "seq-read"
    SEQ_WRITE = "seq-write"
    RAND_READ = "rand-read"
    RAND_WRITE = "rand-write"
    RAND_RW = "rand-rw"

    @property
    def writes(self) -> bool:
        return self in (Workload.SEQ_WRITE, Workload.RAND_WRITE, Workload.RAND_RW)


@dataclass(frozen=True)
class WorkloadSpec:
    kind: Workload
    file_size: int = 4 << 20
    io_size: int = 4096
    rw_ratio: float = 0.7  # fraction of reads in rand-rw
    runs: int = 1
    seed: int = 0
    integrity: IntegrityMode = IntegrityMode.FULL


@dataclass
class BenchResult:
    kind: Workload
    reserved_slots: int
    integrity: IntegrityMode
    mb_per_s: float
    backend_writes: int
    backend_reads: int
    breakdown: LatencyBreakdown = field(repr=False)
    write_counts: list[int] = field(default_factory=list)  # one per run

    def row(self) -> dict:
        pct = self.breakdown.percentages()
        return {
            "workload": self.kind.value, "R": self.reserved_slots, "integrity": self.integrity.value,
            "MB/s": round(self.mb_per_s, 2), "writes": self.backend_writes, "reads": self.backend_reads,
            **{f"{k}%": round(v, 1) for k, v in pct.items()},
        }


def expected_write_count(blocks_per_segment: list[int], reserved_slots: int) -> int:
    """Backend writes for flushed fresh writes touching ``k_i`` blocks of segment ``i``."""
    return sum(k + 2 * -(-k // reserved_slots) for k in blocks_per_segment)


def sequential_write_count(n_blocks: int, layout: LayoutParams) -> int:
    full, rest = divmod(n_blocks, layout.data_slots)
    return expected_write_count([layout.data_slots] * full + ([rest] if rest else []), layout.reserved_slots)


def _offsets(spec: WorkloadSpec, rng: random.Random) -> list[int]:
    n = spec.file_size // spec.io_size
    if spec.kind in (Workload.SEQ_READ, Workload.SEQ_WRITE):
        return [i * spec.io_size for i in range(n)]
    return [rng.randrange(n) * spec.io_size for _ in range(n)]


def run_workload(spec: WorkloadSpec, reserved_slots: int, block_size: int = 4096,
                 keys: SecretKeyPair | None = None) -> BenchResult:
    keys = keys or SecretKeyPair.generate()
    layout = LayoutParams(block_size, reserved_slots)
    prof = LatencyBreakdown()
    counts = []
    reads = 0
    elapsed = 0.0
    moved = 0
    for run in range(spec.runs):
        rng = random.Random(spec.seed * 1000 + run)
        store = MemoryStore()
        if spec.kind is not Workload.SEQ_WRITE:
            with LamassuFile.create(store, "bench", keys, layout) as f:
                f.write(0, rng.randbytes(spec.file_size))
        else:
            store.create_object("bench", ObjectAttrs(layout.block_size, reserved_slots, keys.zone_id))
        store.reset_counters()
        f = LamassuFile.open(store, "bench", keys, integrity=spec.integrity, profiler=prof)
        offsets = _offsets(spec, rng)
        payloads = [rng.randbytes(spec.io_size) for _ in offsets] if spec.kind.writes else []
        t0 = time.perf_counter()
        for i, off in enumerate(offsets):
            is_read = (spec.kind in (Workload.SEQ_READ, Workload.RAND_READ)
                       or (spec.kind is Workload.RAND_RW and rng.random() < spec.rw_ratio))
            with prof.path():
                if is_read:
                    f.read(off, spec.io_size)
                else:
                    f.write(off, payloads[i])
            moved += spec.io_size
        with prof.path():
            f.close()
        elapsed += time.perf_counter() - t0
        counts.append(store.writes)
        reads = store.reads
    return BenchResult(spec.kind, reserved_slots, spec.integrity,
                       moved / elapsed / 1e6 if elapsed else 0.0, counts[-1], reads, prof, counts)


def bench(spec: WorkloadSpec, r_values, block_size: int = 4096,
          keys: SecretKeyPair | None = None) -> list[BenchResult]:
    keys = keys or SecretKeyPair.generate()
    return [run_workload(spec, r, block_size, keys) for r in r_values]
