"""SplitMix64-based deterministic randomness.

Every stochastic choice in the engine flows through this module so that runs
are bit-reproducible from a single 64-bit seed, across platforms and across
independent implementations of the documented algorithms (see
docs/FORMATS.md, "Randomness"). Per-decision streams are derived statelessly
from (seed, salt, frame, instance), so evaluation order never matters.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15

# Stream salts; keep in sync with docs/FORMATS.md and bridge/PROTOCOL.md.
SALT_SAMPLING = 1
SALT_VIS_DROP = 2
SALT_TRACKER_NOISE = 3
SALT_ABLATE_REP = 4
SALT_SCENE = 5


def mix64(x: int) -> int:
    """SplitMix64 finalizer (Steele, Lea, Flood 2014)."""
    x &= MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def derive(seed: int, *keys: int) -> int:
    """Fold keys into a seed: h = mix64(h ^ key) per key."""
    h = seed & MASK64
    for k in keys:
        h = mix64(h ^ (k & MASK64))
    return h


class SplitMix64:
    """The SplitMix64 sequential generator."""

    def __init__(self, seed: int):
        self._state = seed & MASK64

    def next_u64(self) -> int:
        self._state = (self._state + GOLDEN) & MASK64
        return mix64(self._state)

    def uniform(self) -> float:
        """Uniform double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def below(self, n: int) -> int:
        """Uniform integer in [0, n) via rejection sampling (no modulo bias)."""
        if n <= 0:
            raise ValueError(f"bound must be positive, got {n}")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            u = self.next_u64()
            if u < limit:
                return u % n

    def gauss(self) -> float:
        """Standard normal via Box-Muller (cos branch)."""
        import math

        u1 = self.uniform()
        u2 = self.uniform()
        # uniform() can return exactly 0; push it off the log singularity
        u1 = max(u1, 2.0**-53)
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def choose_without_replacement(self, pool: list[int], k: int) -> list[int]:
        """Partial Fisher-Yates over a copy of pool; order = selection order."""
        if k > len(pool):
            raise ValueError(f"cannot draw {k} from pool of {len(pool)}")
        arr = list(pool)
        for i in range(k):
            j = i + self.below(len(arr) - i)
            arr[i], arr[j] = arr[j], arr[i]
        return arr[:k]
