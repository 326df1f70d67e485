"""Deterministic, platform-independent random streams.

Every random decision in the toolkit (schedule shuffles, augmentation
draws) comes from a named stream of the Philox4x32-10 counter-based
generator (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3"),
as shipped by numpy. Philox output is a pure function of its 128-bit key,
so two runs with the same key produce the same draws on every platform.

Key derivation is part of the reproducibility contract and is fixed as:

    key = (seed mod 2^64) << 64  |  fnv1a64(path)

where ``path`` is a tuple of non-negative integers identifying the stream
(purpose constant, then e.g. phase index / cycle / sample index), each
encoded as 8 little-endian bytes and hashed with 64-bit FNV-1a
(offset basis 0xcbf29ce484222325, prime 0x100000001b3).

Draw primitives map onto ``numpy.random.Generator`` methods:
``random()`` for unit floats, ``integers()`` for bounded ints,
``permutation()`` for shuffles. A replay therefore needs the same numpy
major version; the draw values themselves are logged wherever replay
across environments matters (see mdseg.augment).
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_FNV64_OFFSET = 0xCBF29CE484222325
_FNV64_PRIME = 0x100000001B3

# Purpose constants: first element of every stream path.
STREAM_SCHEDULE = 1
STREAM_AUGMENT = 2


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash of a byte string."""
    h = _FNV64_OFFSET
    for b in data:
        h ^= b
        h = (h * _FNV64_PRIME) & _MASK64
    return h


def stream_key(seed: int, *path: int) -> int:
    """Derive the 128-bit Philox key for (seed, path).

    Args:
        seed: user-facing seed, reduced mod 2^64.
        path: non-negative stream coordinates, each < 2^64.

    Returns:
        An integer in [0, 2^128) suitable as a Philox key.
    """
    if any(p < 0 or p > _MASK64 for p in path):
        raise ValueError(f"stream path elements must be in [0, 2^64): {path}")
    payload = b"".join(p.to_bytes(8, "little") for p in path)
    return ((seed & _MASK64) << 64) | fnv1a64(payload)


class RngStream:
    """One named deterministic draw stream.

    Instances are cheap; create one per independent unit of work
    (per schedule cycle, per augmented sample) rather than sharing.
    """

    def __init__(self, seed: int, *path: int):
        self.seed = seed
        self.path = path
        self._gen = np.random.Generator(np.random.Philox(key=stream_key(seed, *path)))

    def unit(self) -> float:
        """Uniform float in [0, 1)."""
        return float(self._gen.random())

    def uniform(self, lo: float, hi: float) -> float:
        """Uniform float in [lo, hi)."""
        return float(self._gen.uniform(lo, hi))

    def integer(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        if n <= 0:
            raise ValueError(f"integer() needs n >= 1, got {n}")
        return int(self._gen.integers(0, n))

    def permutation(self, n: int) -> np.ndarray:
        """Deterministic permutation of range(n)."""
        return self._gen.permutation(n)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, path={self.path})"
