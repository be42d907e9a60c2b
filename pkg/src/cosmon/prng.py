"""SplitMix64 generator.

Every stochastic experiment in the package draws from this generator so that a
seed fixes the output bit for bit, independent of the numpy version.
"""

from __future__ import annotations

import math

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


class SplitMix64:
    """Steele, Lea and Flood's SplitMix64 with a 64-bit state."""

    def __init__(self, seed: int = 0):
        self.state = int(seed) & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def random(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, lo: float = 0.0, hi: float = 1.0, size=None):
        if size is None:
            return lo + (hi - lo) * self.random()
        n = int(np.prod(size))
        vals = np.array([self.random() for _ in range(n)])
        return (lo + (hi - lo) * vals).reshape(size)

    def random_array(self, n: int) -> np.ndarray:
        """``n`` uniforms in [0, 1), identical to ``n`` calls of :meth:`random`."""
        k = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self.state) + k * np.uint64(_GOLDEN)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
            z = z ^ (z >> np.uint64(31))
        self.state = (self.state + n * _GOLDEN) & _MASK
        return (z >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))

    def integers(self, lo: int, hi: int) -> int:
        """Integer in ``[lo, hi)``."""
        span = hi - lo
        if span <= 0:
            raise ValueError("empty integer range")
        return lo + int(self.random() * span)

    def normal(self, size=None):
        """Standard normal by Box-Muller (one variate per pair of uniforms)."""
        def one():
            u1 = 1.0 - self.random()
            u2 = self.random()
            return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

        if size is None:
            return one()
        n = int(np.prod(size))
        return np.array([one() for _ in range(n)]).reshape(size)

    def complex_normal(self, size=None):
        re = self.normal(size)
        im = self.normal(size)
        return re + 1j * im

    def choice(self, seq):
        return seq[self.integers(0, len(seq))]

    def spawn(self) -> "SplitMix64":
        """Independent child stream seeded from the next output."""
        return SplitMix64(self.next_u64())
