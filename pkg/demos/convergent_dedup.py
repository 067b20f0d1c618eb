"""
Convergent encryption keeps deduplication working
=================================================

Two copies of the same file written under one zone produce identical data
blocks, so a deduplicating store keeps only one.  A second zone (different
inner key) shares nothing with the first.
"""

import numpy as np

from lamassu import LamassuFile, LayoutParams, SecretKeyPair
from lamassu.store import DedupStatsStore, dedup_report

rng = np.random.default_rng(0)
data = rng.integers(0, 256, size=2 << 20, dtype=np.uint8).tobytes()
layout = LayoutParams(4096, 8)

# Same zone, two copies
zone = SecretKeyPair.generate(zone_id=1)
store = DedupStatsStore()
for name in ("copy-a", "copy-b"):
    with LamassuFile.create(store, name, zone, layout) as f:
        f.write(0, data)

one = dedup_report(store, ["copy-a"])
both = dedup_report(store)
print("one copy:   %5d blocks stored, %5d unique" % (one.total_blocks, one.unique_blocks))
print("two copies: %5d blocks stored, %5d unique" % (both.total_blocks, both.unique_blocks))
# The only extra unique blocks are the second copy's metadata blocks,
# which carry random GCM nonces.
print("extra unique blocks from the second copy:", both.unique_blocks - one.unique_blocks)

# A different zone
other = SecretKeyPair.generate(zone_id=2)
with LamassuFile.create(store, "copy-c", other, layout) as f:
    f.write(0, data)
print("after a copy in another zone:", dedup_report(store).unique_blocks, "unique")
