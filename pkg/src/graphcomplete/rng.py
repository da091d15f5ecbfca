"""Seeded random streams.

All randomness in the package flows through :func:`make_rng`, which builds a
Philox (counter-based, 64-bit) generator keyed by ``(seed, stream)``.  Philox
produces identical sequences across platforms and numpy versions that ship
the same bit generator, so every run is reproducible from its seed alone.

Streams keep independent purposes independent: masking features never
consumes draws meant for edge removal or weight initialisation, so adding a
consumer in one place cannot silently reshuffle another.
"""

from __future__ import annotations

import numpy as np

# Stream ids, one per purpose.  Never renumber: doing so changes every
# seeded result in the package.
STREAM_FEATURE_MASK = 0
STREAM_EDGE_MASK = 1
STREAM_SPLITS = 2
STREAM_INIT = 3
STREAM_DROPOUT = 4
STREAM_SBM = 5
STREAM_DOWNSTREAM_INIT = 6
STREAM_DOWNSTREAM_DROPOUT = 7


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Return a Philox generator for the given (seed, stream) pair."""
    key = (int(seed) * 2654435761 + int(stream)) % (1 << 128)
    return np.random.Generator(np.random.Philox(key=key))
