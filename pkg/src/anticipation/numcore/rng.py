"""Deterministic random number generation.

All randomness in the package flows through :class:`Rng`, a thin wrapper
around numpy's Philox counter-based bit generator.  Philox guarantees a
stable bit stream for a given key across platforms and numpy releases,
so a 64-bit seed fully determines every dataset, initialization and
shuffle.  Independent substreams are derived with :meth:`child`, which
hashes a string tag into a new key (blake2b, keyed by the parent seed).
"""

from __future__ import annotations

import hashlib

import numpy as np


class Rng:
    """Seeded generator with deterministic substream derivation."""

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._gen = np.random.Generator(np.random.Philox(key=self.seed))

    def child(self, tag: str) -> "Rng":
        """Derive an independent stream named by `tag`, reproducibly."""
        digest = hashlib.blake2b(
            tag.encode("utf-8"),
            digest_size=8,
            key=self.seed.to_bytes(8, "little"),
        ).digest()
        return Rng(int.from_bytes(digest, "little"))

    def normal(self, shape, scale: float = 1.0) -> np.ndarray:
        return self._gen.normal(0.0, scale, size=shape)

    def uniform(self, shape, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        return self._gen.uniform(low, high, size=shape)

    def integers(self, low: int, high: int, size=None):
        return self._gen.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)
