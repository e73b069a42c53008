"""Counter-based random streams.

Every stochastic artifact in this package draws from an `RngStream` keyed by
(seed, stream).  Reconstructing a stream from the same key replays the same
draws regardless of what any other stream did in between, which is what makes
dataset manifests sufficient to reproduce a run bit for bit.  Child streams
are derived by hashing an index into the key, so per-frame / per-anchor work
can be farmed out in any order.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def _mix(a: int, b: int) -> int:
    return _splitmix64(_splitmix64(a & _MASK64) ^ ((b * 0xD1342543DE82EF95) & _MASK64))


class RngStream:
    """A reproducible random stream backed by the Philox counter generator.

    Parameters
    ----------
    seed : int
        Run-level seed shared by every stream of a run.
    stream : int
        Stream identifier.  Streams with different identifiers are
        statistically independent.
    """

    def __init__(self, seed: int, stream: int = 0):
        if not isinstance(seed, (int, np.integer)) or isinstance(seed, bool):
            raise TypeError("seed must be an integer")
        if not isinstance(stream, (int, np.integer)) or isinstance(stream, bool):
            raise TypeError("stream must be an integer")
        self.seed = int(seed) & _MASK64
        self.stream = int(stream) & _MASK64
        key = np.array([self.seed, self.stream], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def child(self, index: int) -> "RngStream":
        """Derive a decorrelated stream keyed by `index` (order independent)."""
        return RngStream(self.seed, _mix(self.stream, int(index)))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self._gen.normal(loc, scale, size)

    def standard_normal(self, size=None):
        return self._gen.standard_normal(size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream={self.stream})"
