"""Deterministic 64-bit PRNG (splitmix-style) with a Box-Muller normal draw.

Everything is plain integer arithmetic on 64-bit words, so any language can
reproduce the exact stream; the synthetic corpus generator depends on this
for byte-identical output.
"""

from __future__ import annotations

import math

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix(z: int) -> int:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK
    return z ^ (z >> 31)


class SplitMix64:
    def __init__(self, seed: int):
        self._seed0 = seed & _MASK
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK
        return _mix(self._state)

    def uniform(self) -> float:
        """Uniform draw in [0, 1) with 53-bit resolution."""
        return (self.next_u64() >> 11) * 2.0**-53

    def below(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        return min(int(self.uniform() * n), n - 1)

    def normal(self) -> float:
        """Standard normal via Box-Muller (cosine branch, two draws each)."""
        u1 = ((self.next_u64() >> 11) + 1) * 2.0**-53  # (0, 1], keeps log finite
        u2 = (self.next_u64() >> 11) * 2.0**-53
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def child(self, tag: int) -> "SplitMix64":
        """Independent stream derived from the base seed and an integer tag.

        Children depend only on the constructor seed, never on how many
        draws were taken from the parent.
        """
        return SplitMix64(_mix((self._seed0 + _GOLDEN * (tag + 1)) & _MASK))
