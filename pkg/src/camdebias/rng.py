"""Portable counter-based random number generation.

The generator is stateless apart from a draw counter: the n-th 64-bit word of
a stream is ``mix64(seed_word + n * GOLDEN)`` where ``mix64`` is the SplitMix64
finalizer. This makes streams reproducible bit-for-bit across platforms and
languages; reimplementations can be checked against the test vectors shipped
in tests/data/rng_test_vectors_seed7.json.

Normal deviates use the Box-Muller transform on consecutive uniform pairs.
"""

import math

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)


def _mix64(x: np.ndarray) -> np.ndarray:
    # SplitMix64 finalizer (Steele, Lea & Flood 2014); wraps mod 2^64.
    with np.errstate(over="ignore"):
        z = x.astype(np.uint64)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


class CounterRng:
    """Deterministic stream of uniforms / normals for a given seed."""

    def __init__(self, seed: int):
        if not 0 <= seed < 2**64:
            raise ValueError("seed must fit in 64 bits")
        self._base = _mix64(np.uint64(seed) + _GOLDEN)
        self._counter = 0

    def next_uint64(self, n: int) -> np.ndarray:
        idx = np.arange(self._counter, self._counter + n, dtype=np.uint64)
        self._counter += n
        with np.errstate(over="ignore"):
            return _mix64(self._base + idx * _GOLDEN)

    def uniform(self, n: int) -> np.ndarray:
        """n uniforms in the open interval (0, 1), 53-bit resolution."""
        words = self.next_uint64(n)
        # +0.5 keeps the result strictly positive so log() below is safe.
        return ((words >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53

    def normal(self, n: int) -> np.ndarray:
        """n standard-normal deviates via Box-Muller on uniform pairs."""
        pairs = (n + 1) // 2
        u = self.uniform(2 * pairs)
        u1, u2 = u[0::2], u[1::2]
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * math.pi * u2
        out = np.empty(2 * pairs, dtype=np.float64)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:n]

    def shuffle(self, n: int) -> np.ndarray:
        """A seeded permutation of range(n) (Fisher-Yates, one word per swap)."""
        perm = np.arange(n)
        if n < 2:
            return perm
        words = self.next_uint64(n - 1)
        for i in range(n - 1, 0, -1):
            j = int(words[n - 1 - i] % np.uint64(i + 1))
            perm[i], perm[j] = perm[j], perm[i]
        return perm

    def choice_without_replacement(self, n: int, k: int) -> np.ndarray:
        """First k entries of a seeded permutation of range(n), sorted."""
        if k > n:
            raise ValueError("k must not exceed n")
        return np.sort(self.shuffle(n)[:k])
