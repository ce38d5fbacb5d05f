"""Seeded, splittable random streams.

Every stochastic routine takes a :class:`RandomStream`.  Sub-streams are
derived from ``(seed, path)`` through :class:`numpy.random.SeedSequence`
spawn keys, so replicate ``i`` of an experiment sees the same numbers no
matter how the replicates are scheduled.
"""
from __future__ import annotations

import numpy as np


class RandomStream:
    """A PCG64 generator tagged with the seed and spawn path that made it."""

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        if not isinstance(seed, (int, np.integer)) or seed < 0:
            raise ValueError(f"seed must be a nonnegative integer, got {seed!r}")
        self.seed = int(seed)
        self.path = tuple(int(p) for p in path)
        self._seq = np.random.SeedSequence(self.seed, spawn_key=self.path)
        self.rng = np.random.Generator(np.random.PCG64(self._seq))

    def child(self, index: int) -> "RandomStream":
        """Deterministic sub-stream ``index``; independent of draws made so far."""
        return RandomStream(self.seed, self.path + (index,))

    def uniform(self) -> float:
        return float(self.rng.random())

    def __repr__(self) -> str:
        return f"RandomStream(seed={self.seed}, path={self.path})"


def as_stream(stream: "RandomStream | int") -> RandomStream:
    if isinstance(stream, RandomStream):
        return stream
    return RandomStream(stream)
