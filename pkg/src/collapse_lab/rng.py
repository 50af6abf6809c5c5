"""Per-trajectory random streams.

Trajectory ``i`` of a run seeded with ``seed`` draws from its own Philox
stream keyed by ``seed ^ i``.  Increments are always drawn per path in blocks
of a fixed length, so the numbers a path sees never depend on how paths are
grouped into chunks or spread over threads.
"""
from __future__ import annotations

import numpy as np

from .errors import BadParams

SEED_MASK = (1 << 64) - 1


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed <= SEED_MASK:
        raise BadParams("seed must be a 64-bit unsigned integer")
    return seed


def path_generator(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=check_seed(seed) ^ int(index)))


class IncrementSource:
    """Brownian increments ``sqrt(dt) * N(0, 1)`` for a contiguous range of paths."""

    def __init__(self, seed: int, first: int, count: int, dt: float):
        self._gens = [path_generator(seed, first + k) for k in range(count)]
        self._scale = float(np.sqrt(dt))

    def block(self, width: int, active: np.ndarray | None = None) -> np.ndarray:
        """Next ``width`` increments of every path (rows of inactive paths are zero)."""
        out = np.zeros((len(self._gens), width))
        for k, g in enumerate(self._gens):
            if active is None or active[k]:
                out[k] = g.standard_normal(width)
        out *= self._scale
        return out
