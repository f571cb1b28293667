"""Seeded generator with fully specified output.

64-bit linear congruential generator with Knuth's MMIX constants.  Only the
top 32 bits of each state are used as output, so the stream is identical on
every platform and in every language that reproduces the recurrence.
"""

from __future__ import annotations

MULTIPLIER = 6364136223846793005
INCREMENT = 1442695040888963407
MASK = (1 << 64) - 1


class Lcg:
    def __init__(self, seed: int):
        self.state = (seed * MULTIPLIER + INCREMENT) & MASK

    def next_u32(self) -> int:
        self.state = (self.state * MULTIPLIER + INCREMENT) & MASK
        return self.state >> 32

    def below(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection."""
        if n <= 0:
            raise ValueError("n must be positive")
        if n == 1:
            return 0
        bits = (n - 1).bit_length()
        while True:
            v = 0
            for _ in range((bits + 31) // 32):
                v = (v << 32) | self.next_u32()
            v &= (1 << bits) - 1
            if v < n:
                return v

    def sample(self, n: int, count: int) -> list[int]:
        """Sorted ``count`` distinct values of range(n) via partial Fisher-Yates."""
        if count > n or count < 0:
            raise ValueError(f"cannot draw {count} of {n}")
        pool = list(range(n))
        for i in range(count):
            j = i + self.below(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return sorted(pool[:count])

    def choice(self, seq):
        return seq[self.below(len(seq))]
