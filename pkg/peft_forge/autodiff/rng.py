"""Seeded, platform-independent random streams.

Rng wraps a counter-based Philox bit generator. ``child(*keys)`` derives an
independent stream from the root seed and a key path, so a sub-stream does
not depend on how many draws were taken from its parent.
"""
import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _key_word(key):
    if isinstance(key, (int, np.integer)):
        return int(key) & _MASK64
    digest = hashlib.blake2b(str(key).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


class Rng:
    def __init__(self, seed, _path=()):
        self.seed = int(seed) & _MASK64
        self.path = tuple(_path)
        entropy = [self.seed, *(_key_word(k) for k in self.path)]
        self._gen = np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))

    def child(self, *keys):
        return Rng(self.seed, self.path + tuple(keys))

    # ---------------- draws (float64, callers cast) ----------------
    def normal(self, shape, sigma=1.0):
        return self._gen.standard_normal(size=shape) * sigma

    def uniform(self, low, high, shape):
        return self._gen.uniform(low, high, size=shape)

    def random(self, shape=None):
        return self._gen.random(size=shape)

    def integers(self, low, high, shape=None):
        return self._gen.integers(low, high, size=shape)

    def permutation(self, n):
        return self._gen.permutation(n)

    def bernoulli_keep(self, keep_prob, shape):
        """Boolean mask, True with probability ``keep_prob``."""
        return self._gen.random(size=shape) < keep_prob

    def __repr__(self):
        return f"Rng(seed={self.seed}, path={self.path})"
