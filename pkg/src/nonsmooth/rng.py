"""Deterministic counter-based random streams.

Every sampling routine in this package draws from a Philox(4x64) generator
keyed by a root seed plus integer stream identifiers.  Sub-streams derive
deterministically from the root seed, so a single trial can be re-run in
isolation and reproduce the exact sample sequence it saw inside a batch.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def stream_key(root_seed: int, *stream: int) -> int:
    """Mix a root seed and stream ids into a single 64-bit Philox key."""
    k = _splitmix64(root_seed & _MASK64)
    for s in stream:
        k = _splitmix64(k ^ (int(s) & _MASK64))
    return k


def make_rng(root_seed: int, *stream: int) -> np.random.Generator:
    """Counter-based generator for ``(root_seed, *stream)``.

    Philox is platform independent, so fixed seeds reproduce bit-for-bit.
    """
    return np.random.Generator(np.random.Philox(key=stream_key(root_seed, *stream)))
