import hashlib
import os
from collections import Counter

import pytest

from lamassu.crypto import SecretKeyPair
from lamassu.engine import IntegrityMode
from lamassu.errors import InvalidArgumentError
from lamassu.layout import LayoutParams
from lamassu.store import DedupStatsStore, dedup_report
from lamassu.toolkit.bench import (Workload, WorkloadSpec, bench, run_workload,
                                   sequential_write_count)
from lamassu.toolkit.datagen import duplicate_count, gen_redundant_file
from lamassu.toolkit.experiments import (crash_matrix, crash_workload, dedup_experiment,
                                         store_encrypted, store_plain)


def fingerprints(data, bs=4096):
    return Counter(hashlib.sha256(data[i:i + bs]).digest() for i in range(0, len(data), bs))


@pytest.mark.parametrize("alpha", [0.0, 0.1, 0.3, 0.5, 0.9])
def test_generator_exactness(alpha):
    n = 1000
    data = gen_redundant_file(n * 4096, alpha, seed=4)
    assert len(data) == n * 4096
    fp = fingerprints(data)
    assert sum(fp.values()) - len(fp) == duplicate_count(n, alpha)
    assert len(fp) == n - int(alpha * n + 1e-9)


def test_generator_alpha_half():
    data = gen_redundant_file(1000 * 4096, 0.5, seed=1)
    assert len(fingerprints(data)) == 500


def test_generator_deterministic():
    assert gen_redundant_file(40960, 0.3, 7) == gen_redundant_file(40960, 0.3, 7)
    assert gen_redundant_file(40960, 0.3, 7) != gen_redundant_file(40960, 0.3, 8)


def test_duplicate_count_float_edges():
    assert duplicate_count(10, 0.3) == 3
    assert duplicate_count(1000, 0.1) == 100


@pytest.mark.parametrize("alpha, size", [(1.0, 4096), (-0.1, 4096), (0.2, 4097)])
def test_generator_rejects(alpha, size):
    with pytest.raises(InvalidArgumentError):
        gen_redundant_file(size, alpha)


def test_raw_store_relative_usage():
    n = 2000
    for alpha in (0.0, 0.25, 0.5):
        st = DedupStatsStore()
        store_plain(st, "p", gen_redundant_file(n * 4096, alpha, 3), 4096)
        assert abs(dedup_report(st).unique_blocks - (1 - alpha) * n) <= 1


def test_two_zones_share_nothing():
    data = gen_redundant_file(300 * 4096, 0.2, 5)
    st = DedupStatsStore()
    a, b = SecretKeyPair.generate(1), SecretKeyPair.generate(2)
    store_encrypted(st, "a", data, a, LayoutParams())
    store_encrypted(st, "b", data, b, LayoutParams())
    both = dedup_report(st).unique_blocks
    assert both == dedup_report(st, ["a"]).unique_blocks + dedup_report(st, ["b"]).unique_blocks


def test_small_dedup_experiment_is_monotone():
    rows = dedup_experiment([0.1, 0.3, 0.5], reserved_slots=8, size=4 << 20, seed=2)
    over = [r.relative_overhead for r in rows]
    assert over == sorted(over)
    rows_r = [dedup_experiment([0.3], r, size=4 << 20, seed=2)[0].relative_overhead for r in (1, 8, 60)]
    assert rows_r == sorted(rows_r)


def test_bench_seq_write_counts_and_determinism():
    spec = WorkloadSpec(Workload.SEQ_WRITE, file_size=118 * 4096, runs=2)
    res = run_workload(spec, 8)
    assert res.write_counts == [148, 148]
    r1 = run_workload(spec, 1)
    assert r1.backend_writes == 3 * 118


def test_bench_write_counts_fall_with_r():
    spec = WorkloadSpec(Workload.SEQ_WRITE, file_size=1 << 20)
    counts = [r.backend_writes for r in bench(spec, [1, 2, 8, 32, 60])]
    assert counts == sorted(counts, reverse=True)
    n = (1 << 20) // 4096
    assert counts == [sequential_write_count(n, LayoutParams(4096, r)) for r in (1, 2, 8, 32, 60)]


@pytest.mark.parametrize("kind", list(Workload))
def test_every_workload_runs(kind):
    spec = WorkloadSpec(kind, file_size=256 * 1024, seed=3)
    a = run_workload(spec, 8, keys=SecretKeyPair(bytes(32), bytes(32)))
    b = run_workload(spec, 8, keys=SecretKeyPair(bytes(32), bytes(32)))
    assert a.backend_writes == b.backend_writes
    if not kind.writes:
        assert a.backend_writes == 0 and a.backend_reads > 0
    row = a.row()
    assert set(row) >= {"workload", "R", "MB/s", "writes", "GetCEKey%", "Misc%"}


def test_rand_rw_read_ratio():
    spec = WorkloadSpec(Workload.RAND_RW, file_size=4 << 20, seed=11)
    res = run_workload(spec, 1)
    n = (4 << 20) // 4096
    # Each R=1 random write costs 3 backend writes, so writes/3 is the write op count.
    assert abs(res.backend_writes / 3 / n - 0.3) < 0.05


def test_meta_only_skips_rehash():
    spec = WorkloadSpec(Workload.SEQ_READ, file_size=512 * 1024, integrity=IntegrityMode.META_ONLY)
    res = run_workload(spec, 8)
    assert res.breakdown.seconds["GetCEKey"] == 0.0


def test_crash_workload_spans_two_segments():
    p = LayoutParams(4096, 8)
    ops = crash_workload(p, 150 * 4096)
    assert max(off + len(d) for off, d in ops) > p.data_slots * 4096


def test_small_crash_matrix():
    rep = crash_matrix(file_size=20 * 1024, reserved_slots=2, block_size=1024, seed=1)
    assert rep.cases and not rep.failures
    assert rep.cases[0].crashed
    assert not rep.cases[-1].crashed
    assert len(rep.cases) == rep.total_writes + 1
