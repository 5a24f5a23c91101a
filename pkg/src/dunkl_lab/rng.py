"""Deterministic random streams for path-parallel Monte Carlo.

Every consumer of randomness gets its own counter-based Philox stream,
keyed by ``(master seed, purpose, *indices)`` through a ``SeedSequence``
spawn key.  A path's stream depends only on the master seed and the path
index, never on batching or scheduling, so any path can be regenerated in
isolation and whole runs are reproducible bit for bit for a fixed
configuration, regardless of worker count.
"""

from __future__ import annotations

import numpy as np

# Stream purposes.  Values are part of the reproducibility contract: changing
# them changes every simulated path.
DIFFUSION = 0   # per-path Gaussian increments, consumed one grid step at a time
RETRY = 1       # fresh increments for rejected / subdivided steps
CLOCK = 2       # exponential thresholds for jump clocks
FLIP = 3        # Poisson streams for shortcut-mode lifts
CHECK = 4       # verification-side sampling (oracles, test points)


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for the given purpose/index key."""
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(seq))
