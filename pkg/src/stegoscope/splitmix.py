"""SplitMix64, the one PRNG used everywhere that determinism matters.

The scalar form works on Python ints; :func:`splitmix64_stream` produces the
same sequence vectorised with wrapping ``uint64`` arithmetic.
"""

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def splitmix64_next(state):
    """Advance ``state`` once and return ``(new_state, output)``."""
    state = (state + GOLDEN_GAMMA) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return state, z ^ (z >> 31)


def splitmix64_stream(state, n):
    """First ``n`` outputs from ``state`` as a ``uint64`` array."""
    k = np.arange(1, n + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(state & MASK64) + k * np.uint64(GOLDEN_GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


class SplitMix64:
    """Small stateful wrapper for code that draws values one call at a time."""

    def __init__(self, seed):
        self.state = int(seed) & MASK64

    def next_u64(self):
        self.state, out = splitmix64_next(self.state)
        return out

    def below(self, n):
        # plain modulo reduction; the bias is part of the pinned behaviour
        return self.next_u64() % n

    def u64_array(self, n):
        out = splitmix64_stream(self.state, n)
        self.state = (self.state + n * GOLDEN_GAMMA) & MASK64
        return out

    def uniform(self, n):
        """``n`` doubles in [0, 1) built from the top 53 bits of each draw."""
        return (self.u64_array(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def shuffle(self, items):
        """In-place Fisher-Yates, walking from the last index down to 1."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]
        return items
