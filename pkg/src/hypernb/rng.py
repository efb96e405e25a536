"""Seeded substreams: one root seed, named counter-based streams everywhere.

Every source of randomness in the package derives from a 64-bit root seed
through a named Philox substream, so results are reproducible regardless of
evaluation order or parallel scheduling.
"""

from __future__ import annotations

import numpy as np

# stream names; extend only by appending so existing outputs stay stable
STREAM_HSBM = 0
STREAM_LABELS = 1
STREAM_GW = 2
STREAM_ARNOLDI = 3
STREAM_ROUND = 4
STREAM_WEIGHTS = 5
STREAM_PROBE = 6
STREAM_TREECHECK = 7


def substream(seed: int, *key: int) -> np.random.Generator:
    """Philox generator for the (seed, key...) substream."""
    seed = int(seed)
    if seed < 0:
        seed &= (1 << 64) - 1
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(seed=ss))
