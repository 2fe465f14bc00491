"""Counter-based, splittable random streams.

A :class:`Prng` is addressed by ``(seed, stream_id)`` plus an optional path of
sub-keys. The address is hashed into a Philox key, so any stream can be
rebuilt from its address alone, independent of what else was drawn before.
That is what lets a parallel sweep reproduce a serial one bit for bit.
"""
from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


class Prng:
    def __init__(self, seed: int, stream_id: int = 0, path: tuple[int, ...] = ()):
        if not 0 <= seed <= _MASK64 or not 0 <= stream_id <= _MASK64:
            raise ValueError("seed and stream_id must be unsigned 64-bit integers")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self.path = tuple(int(p) & _MASK64 for p in path)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id, *self.path))
        self._gen = np.random.Generator(np.random.Philox(ss))

    def child(self, *keys: int) -> "Prng":
        """Independent stream derived from this address extended by ``keys``."""
        return Prng(self.seed, self.stream_id, self.path + tuple(keys))

    def __repr__(self) -> str:
        return f"Prng(seed={self.seed}, stream_id={self.stream_id}, path={self.path})"

    # draws -----------------------------------------------------------------
    def normal(self, size=None, scale: float = 1.0) -> np.ndarray:
        return self._gen.normal(0.0, scale, size=size)

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None):
        return self._gen.uniform(low, high, size=size)

    def integers(self, low: int, high: int | None = None, size=None):
        return self._gen.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def choice_without_replacement(self, n: int, k: int) -> np.ndarray:
        """``k`` distinct indices from ``range(n)``."""
        if not 0 <= k <= n:
            raise ValueError(f"cannot draw {k} distinct items from {n}")
        return self._gen.permutation(n)[:k]

    def random_bits(self, size=None) -> np.ndarray:
        return self._gen.integers(0, 2, size=size, dtype=np.uint8)


def stream_for(seed: int, *keys: int) -> Prng:
    """Stream addressed by ``seed`` and a key path; first key is the stream id."""
    if not keys:
        return Prng(seed)
    return Prng(seed, keys[0], tuple(keys[1:]))
