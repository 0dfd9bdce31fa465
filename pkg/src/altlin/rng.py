"""Portable pseudo-random streams for instance generation.

Draws come from SplitMix64 in counter mode: the ``i``-th raw word of a stream
seeded with ``s`` is ``mix(s + (i + 1) * 0x9E3779B97F4A7C15)`` with the usual
SplitMix64 finalizer, all arithmetic modulo 2**64.  Uniforms take the top 53
bits; normals use Box-Muller on consecutive uniform pairs.  The recipe is short
enough to port, so generated instances can be reproduced outside numpy.
"""

from __future__ import annotations

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


class SplitMix64:
    """Counter-based SplitMix64 stream."""

    def __init__(self, seed: int):
        self.state = np.uint64(int(seed) % 2**64)
        self.counter = 0

    def raw(self, count: int) -> np.ndarray:
        idx = np.arange(self.counter + 1, self.counter + 1 + count, dtype=np.uint64)
        self.counter += count
        with np.errstate(over="ignore"):
            return _mix(self.state + idx * _GAMMA)

    def uniform(self, count: int) -> np.ndarray:
        """Doubles in ``[0, 1)``."""
        return (self.raw(count) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normal(self, count: int) -> np.ndarray:
        pairs = (count + 1) // 2
        u = self.uniform(2 * pairs)
        u1 = 1.0 - u[0::2]  # in (0, 1]
        u2 = u[1::2]
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.empty(2 * pairs)
        z[0::2] = r * np.cos(2.0 * np.pi * u2)
        z[1::2] = r * np.sin(2.0 * np.pi * u2)
        return z[:count]

    def choice(self, population: int, k: int) -> np.ndarray:
        """``k`` distinct indices from ``range(population)`` by partial Fisher-Yates."""
        if not 0 <= k <= population:
            raise ValueError(f"cannot draw {k} from {population}")
        perm = np.arange(population, dtype=np.int64)
        u = self.uniform(k)
        for i in range(k):
            j = i + int(u[i] * (population - i))
            perm[i], perm[j] = perm[j], perm[i]
        return np.sort(perm[:k])
