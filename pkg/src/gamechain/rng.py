"""Counter-based random streams addressed by (seed, stream, index).

Every replication draws from its own Philox substream, so results do not
depend on batch sizes, chunking or the number of worker threads.
"""

from __future__ import annotations

import numpy as np

# named stream ids
CHAIN = 1
BRIDGE = 2
MC = 3
PROBE = 4
CF = 5

_U64 = (1 << 64) - 1


def generator(seed: int, stream: int, index: int = 0) -> np.random.Generator:
    """Return the generator for substream ``index`` of ``(seed, stream)``."""
    if seed < 0 or stream < 0 or index < 0:
        raise ValueError("seed, stream and index must be non-negative")
    key = (int(seed) & _U64) | ((int(stream) & _U64) << 64)
    # high counter word carries the index; low words advance with draws
    bitgen = np.random.Philox(key=key, counter=[0, 0, 0, int(index) & _U64])
    return np.random.Generator(bitgen)
