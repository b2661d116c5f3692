"""Counter-based random number generation.

Every random quantity in the pipeline is a pure function of
``(seed, stream, word...)`` where the words identify the consumer (edge
index, draw index, slot, row, column, ...).  This makes results independent
of thread scheduling and lets any stage be reproduced in isolation.

The core primitive is the splitmix64 finalizer, a bijection on 64-bit
integers, chained once per key word.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1

_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

# Named sub-streams.  Values are arbitrary but frozen: changing them changes
# every seeded result.
STREAM_EDGE_COUNT = 1
STREAM_SAMPLING = 2
STREAM_OMEGA = 3
STREAM_SPLIT = 4
STREAM_CORRUPT = 5
STREAM_TUNER = 6
STREAM_GRAPH_GEN = 7
STREAM_WALK = 8


def mix64(x: int) -> int:
    """Splitmix64 finalizer on a Python int (masked to 64 bits)."""
    z = x & MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def hash_words(seed: int, *words: int) -> int:
    """Hash a seed plus integer key words to one 64-bit value."""
    h = mix64(seed)
    for w in words:
        h = mix64(((h + _GOLDEN) & MASK64) ^ (w & MASK64))
    return h


def _mix64_np(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(_MIX1)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def hash_arrays(seed: int, *words) -> np.ndarray:
    """Vectorized ``hash_words``; words broadcast against each other."""
    h = np.uint64(mix64(seed))
    shape = np.broadcast_shapes(*(np.shape(w) for w in words))
    h = np.broadcast_to(h, shape).copy()
    for w in words:
        h = _mix64_np((h + np.uint64(_GOLDEN)) ^ np.asarray(w, dtype=np.uint64))
    return h


def uniform_from_bits(bits: np.ndarray) -> np.ndarray:
    """Map 64-bit words to float64 uniforms in [0, 1)."""
    return (bits >> np.uint64(11)).astype(np.float64) * 2.0**-53


def u32_from_bits(bits):
    """Upper 32 bits, as uint64 so modulo arithmetic stays in uint64."""
    return bits >> np.uint64(32)


def normal_from_bits(bits: np.ndarray) -> np.ndarray:
    """Standard normals via the inverse CDF; deterministic and vectorized."""
    from scipy.special import ndtri

    u = uniform_from_bits(bits) + 2.0**-54  # keep strictly inside (0, 1)
    return ndtri(u)


class StreamRng:
    """Sequential view of a counter-based stream.

    ``StreamRng(seed, stream, *key)`` draws values ``hash(seed, stream,
    key..., 0), hash(..., 1), ...``.  State is just the counter, so a walk or
    sampler driven by it is a pure function of the constructor arguments and
    the number of values already drawn.
    """

    __slots__ = ("_base", "counter")

    def __init__(self, seed: int, stream: int, *key: int):
        h = mix64(seed)
        for w in (stream,) + key:
            h = mix64(((h + _GOLDEN) & MASK64) ^ (w & MASK64))
        self._base = h
        self.counter = 0

    def next_u64(self) -> int:
        h = mix64(((self._base + _GOLDEN) & MASK64) ^ self.counter)
        self.counter += 1
        return h

    def next_u32(self) -> int:
        return self.next_u64() >> 32

    def next_float(self) -> float:
        return (self.next_u64() >> 11) * 2.0**-53
