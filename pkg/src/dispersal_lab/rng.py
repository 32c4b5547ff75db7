"""Per-replica random streams.

Each replica owns a counter-based Philox generator keyed by a 64-bit seed
mixed from (master_seed, replica_index), so results do not depend on how
replicas are scheduled across workers.
"""
from __future__ import annotations

import math

import numpy as np

__all__ = ["derive_replica_seed", "UniformStream"]

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix64(z: int) -> int:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK
    return z ^ (z >> 31)


def derive_replica_seed(master_seed: int, replica_index: int) -> int:
    """SplitMix64 finaliser applied to master_seed + (index + 1) * golden gamma."""
    if replica_index < 0:
        raise ValueError("replica_index must be non-negative")
    return _mix64((int(master_seed) + (int(replica_index) + 1) * _GOLDEN) & _MASK)


class UniformStream:
    """Buffered U[0, 1) draws from Philox; duck-types ``Generator.random()``."""

    __slots__ = ("_gen", "_buf", "_pos", "_block")

    def __init__(self, seed: int, block: int = 64):
        self._gen = np.random.Generator(np.random.Philox(key=int(seed) & _MASK))
        self._block = block
        self._buf: list[float] = []
        self._pos = 0

    def random(self, size=None):
        if size is not None:
            return np.array([self.random() for _ in range(int(np.prod(size)))]).reshape(size)
        if self._pos == len(self._buf):
            self._buf = self._gen.random(self._block).tolist()
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return u

    def exponential(self) -> float:
        """Exp(1) by inversion."""
        return -math.log1p(-self.random())
