"""Deterministic, splittable random streams.

A stream is a (seed, key) pair fed into numpy's SeedSequence, so any node in
the split tree yields the same generator on every run and platform regardless
of how sibling streams are consumed. Pipelines split once per step, per-image
ops split once per image index below that.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    """Root seed plus the path of split indices that led here."""

    seed: int
    key: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "seed", int(self.seed) & _MASK64)
        object.__setattr__(self, "key", tuple(int(k) & _MASK64 for k in self.key))

    def split(self, *indices: int) -> "RngStream":
        """Child stream at the given indices; independent of its siblings."""
        return RngStream(self.seed, self.key + tuple(indices))

    def generator(self) -> np.random.Generator:
        """Fresh generator at this node; repeated calls restart the sequence."""
        return np.random.default_rng(np.random.SeedSequence((self.seed, *self.key)))


def as_stream(rng: RngStream | int) -> RngStream:
    """Accept either a stream or a bare seed."""
    return rng if isinstance(rng, RngStream) else RngStream(int(rng))
