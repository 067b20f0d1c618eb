"""
Where the time goes
===================

Run the FIO-style workloads in memory and split latency into Encrypt,
Decrypt, GetCEKey, IO and Misc.  Absolute MB/s depends on the machine;
the backend write counts do not.
"""

from lamassu import IntegrityMode
from lamassu.toolkit.bench import Workload, WorkloadSpec, bench

for kind in (Workload.SEQ_READ, Workload.SEQ_WRITE, Workload.RAND_RW):
    for row in bench(WorkloadSpec(kind, file_size=2 << 20), [1, 8, 48]):
        print(row.row())

spec = WorkloadSpec(Workload.SEQ_READ, file_size=2 << 20, integrity=IntegrityMode.META_ONLY)
print(bench(spec, [8])[0].row())
