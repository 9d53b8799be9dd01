"""Deterministic, counter-based random streams.

Every stochastic operation takes an explicit :class:`RngStream`. A stream is
a Philox generator keyed by the 64-bit master seed plus a path of names, so
``RngStream(7).child("dropout")`` is the same sequence in every process and
on every run, independent of what other streams consumed.
"""

import hashlib

import numpy as np

_SEED_MASK = (1 << 64) - 1


def _name_key(name: str) -> int:
    digest = hashlib.blake2b(name.encode("utf-8"), digest_size=4).digest()
    return int.from_bytes(digest, "little")


class RngStream:
    """A named Philox stream derived from a master seed."""

    def __init__(self, seed: int, path: tuple[str, ...] = ()):
        self.seed = int(seed) & _SEED_MASK
        self.path = path
        sequence = np.random.SeedSequence(
            entropy=self.seed, spawn_key=tuple(_name_key(p) for p in path)
        )
        self.generator = np.random.Generator(np.random.Philox(sequence))

    def child(self, *names: str) -> "RngStream":
        """Return an independent stream addressed by ``names`` below this one."""
        return RngStream(self.seed, self.path + tuple(names))

    def draw_seed(self) -> int:
        """Draw a fresh 63-bit seed, e.g. for a trial."""
        return int(self.generator.integers(0, 1 << 63))

    def uniform(
        self, low: float = 0.0, high: float = 1.0, size: tuple[int, ...] | None = None
    ) -> np.ndarray:
        return self.generator.uniform(low, high, size)

    def normal(
        self, loc: float = 0.0, scale: float = 1.0, size: tuple[int, ...] | None = None
    ) -> np.ndarray:
        return self.generator.normal(loc, scale, size)

    def integers(self, low: int, high: int, size: tuple[int, ...] | None = None) -> np.ndarray:
        return self.generator.integers(low, high, size)

    def permutation(self, n: int) -> np.ndarray:
        return self.generator.permutation(n)

    def bernoulli(self, keep: float, shape: tuple[int, ...]) -> np.ndarray:
        """Sample a 0/1 float mask where each entry is 1 with probability ``keep``."""
        return (self.generator.random(shape) < keep).astype(np.float64)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, path={'/'.join(self.path) or '.'})"
