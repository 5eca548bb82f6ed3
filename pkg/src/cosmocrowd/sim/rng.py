"""SplitMix64 generator for reproducible fleet simulations.

Same seed, same draw sequence on every platform; all variates are derived from
``next_u64`` so the draw order of a simulation fully determines its output.
"""

import math

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


class SplitMix64:
    """Seeded 64-bit PRNG."""

    def __init__(self, seed: int):
        self._state = seed & MASK64

    def next_u64(self) -> int:
        self._state = (self._state + GOLDEN_GAMMA) & MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def next_float(self) -> float:
        """Uniform in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * self.next_float()

    def randint(self, low: int, high: int) -> int:
        """Uniform integer in [low, high] (inclusive)."""
        if high < low:
            raise ValueError(f"Empty integer range [{low}, {high}]")
        return low + int(self.next_float() * (high - low + 1))

    def exponential(self, rate: float) -> float:
        """Exponential variate with the given rate (mean 1/rate)."""
        return -math.log1p(-self.next_float()) / rate

    def geometric(self, p: float) -> int:
        """Failures before the first success, success probability p."""
        if p >= 1.0:
            return 0
        return int(math.floor(math.log1p(-self.next_float()) / math.log1p(-p)))
