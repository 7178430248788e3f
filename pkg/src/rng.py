"""Seeded, splittable random streams for reproducible shot sampling."""
from __future__ import annotations

from typing import List, Optional

import numpy as np

from errors import SimulationError

RNG_NAME = "PCG64"
_SEED_LIMIT = 2 ** 64


class ShotRng:
    """Wrapper around numpy's PCG64 generator with SeedSequence-based splitting."""

    name = RNG_NAME

    def __init__(self, seed: int, _sequence: Optional[np.random.SeedSequence] = None):
        if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)) or not 0 <= seed < _SEED_LIMIT:
            raise SimulationError(f"seed must be an integer in [0, 2^64), got {seed!r}")
        self._seed = int(seed)
        self._sequence = _sequence if _sequence is not None else np.random.SeedSequence(self._seed)
        self.generator = np.random.Generator(np.random.PCG64(self._sequence))

    @property
    def seed(self) -> int:
        return self._seed

    def spawn(self, count: int) -> List["ShotRng"]:
        """Independent child streams; on a fresh stream the i-th child depends only on (seed, i)."""
        return [ShotRng(self._seed, child) for child in self._sequence.spawn(count)]
