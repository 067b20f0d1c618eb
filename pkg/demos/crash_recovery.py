"""
Crashing in the middle of a commit
==================================

Kill a write after each of its block writes in turn, then recover and
read.  Every block comes back either as it was before the write or as it
was meant to be after it.
"""

import os

from lamassu import LamassuFile, LayoutParams, MemoryStore, SecretKeyPair
from lamassu.errors import CrashDetectedError, SimulatedCrash

keys = SecretKeyPair.generate()
layout = LayoutParams(4096, 4)
before = os.urandom(12 * 4096)
update = os.urandom(6 * 4096)
after = before[:4096] + update + before[7 * 4096:]

base = MemoryStore()
with LamassuFile.create(base, "f", keys, layout) as f:
    f.write(0, before)

# One commit of 4 blocks, then one of 2: (4 + 2) + (2 + 2) = 10 writes
for fault in range(11):
    store = base.snapshot()
    store.inject_fault(fault)
    try:
        with LamassuFile.open(store, "f", keys) as f:
            f.write(4096, update)
    except SimulatedCrash:
        pass
    store.reset_fault()

    g = LamassuFile.open(store, "f", keys)
    try:
        g.read(0, 4096 * 12)
        state = "clean"
    except CrashDetectedError:
        state = "midupdate"
    rep = g.recover()
    got = g.read(0, g.logical_size)
    blocks = ["new" if got[i:i + 4096] == after[i:i + 4096] and got[i:i + 4096] != before[i:i + 4096]
              else "old" for i in range(4096, 7 * 4096, 4096)]
    print("fault after %2d writes: %-9s -> new %d, old %d, lost %d   %s"
          % (fault, state, rep.blocks_resolved_to_new, rep.blocks_resolved_to_old,
             rep.blocks_unrecoverable, " ".join(blocks)))
