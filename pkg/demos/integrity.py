"""
Detecting tampering
===================

Flip single bits in a stored object.  Metadata damage fails GCM
authentication for exactly one segment.  Data damage fails the convergent
key recomputation for exactly one block, unless the reader opted out of
that check.
"""

import os

from lamassu import IntegrityMode, LamassuFile, LayoutParams, MemoryStore, SecretKeyPair
from lamassu.errors import DataIntegrityError

keys = SecretKeyPair.generate()
layout = LayoutParams(4096, 8)
store = MemoryStore()
with LamassuFile.create(store, "f", keys, layout) as f:
    f.write(0, os.urandom(300 * 4096))

# physical block 5 is data block 4 of segment 0; block 119 heads segment 1
store.corrupt("f", 5, 1234)
store.corrupt("f", 119, 777)

for failure in LamassuFile.open(store, "f", keys).verify().failures:
    print(failure)

try:
    LamassuFile.open(store, "f", keys).read(4 * 4096, 4096)
except DataIntegrityError as e:
    print("full read refused logical block", e.logical_block)

fast = LamassuFile.open(store, "f", keys, integrity=IntegrityMode.META_ONLY)
print("meta-only read returned %d (garbled) bytes without complaint" % len(fast.read(4 * 4096, 4096)))
