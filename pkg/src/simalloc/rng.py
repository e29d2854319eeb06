"""Deterministic 64-bit random source (splitmix64).

All workload generation uses this generator so that identical seeds give
byte-identical traces on every platform. The algorithm name is recorded in
trace headers; readers can refuse traces produced by an unknown generator.
"""

MASK64 = (1 << 64) - 1
RNG_NAME = "splitmix64"

_GOLDEN = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    """The splitmix64 finalizer: a high-quality 64-bit mixing function."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return (z ^ (z >> 31)) & MASK64


class SplitMix64:
    """Sequential splitmix64 stream.

    Streams are splittable: ``split(k)`` derives an independent child stream
    from the parent seed and the child index, so per-thread streams do not
    depend on the order in which other threads draw numbers.
    """

    __slots__ = ("_state", "seed")

    def __init__(self, seed: int):
        self.seed = seed & MASK64
        self._state = seed & MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & MASK64
        return mix64(self._state)

    def split(self, index: int) -> "SplitMix64":
        """Child stream ``index`` of this stream's seed."""
        return SplitMix64(mix64(self.seed ^ mix64(index + 1)))

    def randrange(self, n: int) -> int:
        """Integer in [0, n). Uses rejection to avoid modulo bias."""
        if n <= 0:
            raise ValueError("randrange() arg must be positive")
        limit = (MASK64 + 1) - ((MASK64 + 1) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def randint(self, a: int, b: int) -> int:
        """Integer in [a, b] inclusive."""
        return a + self.randrange(b - a + 1)

    def random(self) -> float:
        """Float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def pareto_truncated(self, shape: float, lo: int, hi: int) -> int:
        """Pareto(shape) sample with scale ``lo``, truncated to [lo, hi].

        Uses the inverse CDF of the truncated distribution, so no rejection
        loop is needed and the draw consumes exactly one u64.
        """
        if shape <= 0:
            raise ValueError("pareto shape must be positive")
        u = self.random()
        # CDF of Pareto(scale=lo) at hi; map u into [0, F(hi)].
        f_hi = 1.0 - (lo / hi) ** shape
        x = lo * (1.0 - u * f_hi) ** (-1.0 / shape)
        return max(lo, min(hi, int(x)))
