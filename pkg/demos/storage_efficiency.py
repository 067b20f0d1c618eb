"""
Storage efficiency against redundancy
=====================================

Sweep the duplicate fraction alpha of a synthetic file and compare the
deduplicated footprint of the plaintext with the encrypted object.  The
gap is the in-band metadata, and it grows with R.
"""

import numpy as np

from lamassu import LayoutParams, min_overhead_ratio
from lamassu.toolkit.experiments import dedup_experiment

size = 16 << 20
alphas = np.round(np.arange(0.1, 0.6, 0.1), 2)

for r in (1, 8, 60):
    print("R=%d  (key table holds %d data blocks, floor %.3f%%)"
          % (r, LayoutParams(4096, r).data_slots, 100 * min_overhead_ratio(LayoutParams(4096, r))))
    for row in dedup_experiment(alphas, reserved_slots=r, size=size, seed=1):
        print("   alpha=%.1f  plain %.1f%%  encrypted %.1f%%  overhead %.3f%%"
              % (row.alpha, 100 * row.plain_relative_usage,
                 100 * row.lamassu_relative_usage, 100 * row.relative_overhead))

# The overhead rises with alpha because duplicated plaintext shrinks while
# every segment keeps its own (never deduplicated) metadata block.
