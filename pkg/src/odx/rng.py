"""Seeded, portable pseudo-random generator for reproducible sampling.

Cohort matching and bootstrap resampling must be replayable bit-for-bit by
an independent implementation, so the generator here is pinned to two
published algorithms rather than whatever the host runtime ships:

* state expansion from the 64-bit seed uses splitmix64 (Vigna),
* the stream itself is xoshiro256** (Blackman & Vigna).

Draw protocols built on the raw stream are fixed too:

* ``randbelow(n)``: rejection sampling on 64-bit words. Let
  ``lim = 2**64 - (2**64 % n)``; draw words until one is ``< lim`` and
  return ``word % n``.
* ``random()``: ``(next_u64() >> 11) * 2**-53``.
* ``shuffle(xs)``: Fisher-Yates from the back, ``j = randbelow(i + 1)``.
* ``sample_indices(n, k)``: partial Fisher-Yates from the front over
  ``range(n)``; returns the first ``k`` slots.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One splitmix64 step; returns the mixed output for state ``x + GAMMA``."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, index: int) -> int:
    """Derive a child seed for stream ``index`` (used for per-tree streams)."""
    return splitmix64((splitmix64(seed & _MASK64) ^ index) & _MASK64)


class Xoshiro256StarStar:
    """xoshiro256** seeded by splitmix64 expansion of a 64-bit seed."""

    def __init__(self, seed: int):
        self.seed = seed & _MASK64
        x = self.seed
        state = []
        for _ in range(4):
            x = (x + 0x9E3779B97F4A7C15) & _MASK64
            z = x
            z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
            z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
            state.append(z ^ (z >> 31))
        self._s = state

    def next_u64(self) -> int:
        s = self._s
        s1 = s[1]
        x = (s1 * 5) & _MASK64
        result = (((x << 7) | (x >> 57)) & _MASK64) * 9 & _MASK64
        t = (s1 << 17) & _MASK64
        s[2] ^= s[0]
        s[3] ^= s1
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s3 = s[3]
        s[3] = ((s3 << 45) | (s3 >> 19)) & _MASK64
        return result

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection sampling."""
        if n <= 0:
            raise ValueError("randbelow() requires n >= 1")
        lim = (1 << 64) - ((1 << 64) % n)
        while True:
            u = self.next_u64()
            if u < lim:
                return u % n

    def random(self) -> float:
        """Uniform double in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * 2.0 ** -53

    def shuffle(self, xs: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(xs) - 1, 0, -1):
            j = self.randbelow(i + 1)
            xs[i], xs[j] = xs[j], xs[i]

    def sample_indices(self, n: int, k: int) -> list[int]:
        """k distinct indices drawn without replacement from range(n)."""
        if not 0 <= k <= n:
            raise ValueError("sample_indices() requires 0 <= k <= n")
        idx = list(range(n))
        for i in range(k):
            j = i + self.randbelow(n - i)
            idx[i], idx[j] = idx[j], idx[i]
        return idx[:k]
