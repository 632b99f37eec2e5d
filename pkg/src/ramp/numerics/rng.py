"""Seeded RNG with label-keyed sub-streams for reproducible stage pipelines."""
from __future__ import annotations

import hashlib

import numpy as np


def _label_key(label: str) -> int:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


class Rng:
    """PCG64 stream keyed by (seed, label path); identical seed => identical draws."""

    def __init__(self, seed: int, _path: tuple[int, ...] = ()):
        self.seed = int(seed)
        self._path = _path
        self._gen = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence([self.seed, *_path]))
        )

    def split(self, label: str) -> "Rng":
        """Independent child stream; same (seed, label) always yields the same child."""
        return Rng(self.seed, self._path + (_label_key(label),))

    def normal(self, shape=()) -> np.ndarray:
        return self._gen.standard_normal(shape)

    def uniform(self, low: float = 0.0, high: float = 1.0, shape=()) -> np.ndarray:
        return self._gen.uniform(low, high, shape)

    def integers(self, low: int, high: int, shape=()) -> np.ndarray:
        return self._gen.integers(low, high, size=shape)

    def choice(self, n: int, size=None, replace: bool = True) -> np.ndarray:
        return self._gen.choice(n, size=size, replace=replace)

    def shuffle(self, x) -> None:
        self._gen.shuffle(x)
