"""Synthetic files with a known fraction of redundant blocks."""

from __future__ import annotations

import math

import numpy as np

from ..errors import InvalidArgumentError


def duplicate_count(n_blocks: int, alpha: float) -> int:
    # The epsilon keeps e.g. 0.3 * 10 from flooring to 2.
    return math.floor(alpha * n_blocks + 1e-9)


def gen_redundant_file(size: int, alpha: float, seed: int = 0, block_size: int = 4096) -> bytes:
    """Return ``size // block_size`` blocks, ``floor(alpha * N)`` of them copies.

    Duplicate positions are drawn uniformly from blocks 1..N-1 and each copies
    a uniformly chosen earlier block; every other block is fresh random data.
    Output is a pure function of the arguments.
    """
    if not 0 <= alpha < 1:
        raise InvalidArgumentError("alpha must be in [0, 1)")
    if size < 0 or size % block_size:
        raise InvalidArgumentError(f"size must be a non-negative multiple of {block_size}")
    n = size // block_size
    rng = np.random.default_rng(seed)
    blocks = rng.integers(0, 256, size=(n, block_size), dtype=np.uint8)
    d = duplicate_count(n, alpha)
    if d:
        dup_pos = np.sort(rng.choice(np.arange(1, n), size=d, replace=False))
        for i in dup_pos:
            blocks[i] = blocks[rng.integers(0, i)]
    return blocks.tobytes()
