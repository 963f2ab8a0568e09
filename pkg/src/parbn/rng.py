"""Deterministic 64-bit PRNG used everywhere randomness is consumed.

SplitMix64 (Steele, Lea & Vigna): a documented, fixed algorithm with a
64-bit seed and a 64-bit state.  The compiled sampling engine carries a
bit-identical twin operating on a uint64 array, so draw sequences are
reproducible across the interpreted and compiled paths within one build.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

# One uniform double consumes exactly one 64-bit output: the top 53 bits.
_DOUBLE_UNIT = 1.0 / 9007199254740992.0  # 2**-53


class SplitMix64:
    """Sequential SplitMix64 stream; identical seeds yield identical draws."""

    __slots__ = ("seed", "state", "position")

    def __init__(self, seed: int):
        self.seed = seed & _MASK
        self.state = seed & _MASK
        self.position = 0

    def next_u64(self) -> int:
        self.state = (self.state + _GAMMA) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK
        z ^= z >> 31
        self.position += 1
        return z

    def uniform(self) -> float:
        """One double in [0, 1), from the top 53 bits of one output."""
        return (self.next_u64() >> 11) * _DOUBLE_UNIT

    def next_below(self, n: int) -> int:
        """Integer in [0, n) by modulo reduction (bias is negligible for the
        tiny ranges used here and determinism is what matters)."""
        return self.next_u64() % n
