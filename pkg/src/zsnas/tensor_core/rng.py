from __future__ import annotations

import zlib

import numpy as np


def _key_to_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        return int(key) & 0xFFFFFFFF
    return zlib.crc32(str(key).encode("utf-8"))


class RngState:
    """Seeded generator for uniform and standard-normal f64 streams.

    Backed by numpy's PCG64, whose output is specified bit-for-bit and does not
    depend on platform. ``derive`` produces independent child streams keyed by
    labels, so each job owns its own generator.
    """

    def __init__(self, seed: int, *path):
        self.seed = int(seed)
        self.path = tuple(path)
        self.counter = 0
        entropy = [self.seed & 0xFFFFFFFF, (self.seed >> 32) & 0xFFFFFFFF] + [_key_to_int(k) for k in self.path]
        self._gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))

    def derive(self, *keys) -> RngState:
        return RngState(self.seed, *self.path, *keys)

    def normal(self, shape) -> np.ndarray:
        out = self._gen.standard_normal(shape)
        self.counter += out.size
        return out

    def uniform(self, shape=None, low: float = 0.0, high: float = 1.0):
        out = self._gen.uniform(low, high, shape)
        self.counter += np.size(out)
        return out

    def integers(self, low: int, high: int, size=None):
        self.counter += 1 if size is None else int(np.prod(size))
        return self._gen.integers(low, high, size)

    def choice(self, n: int, size: int, replace: bool = False) -> np.ndarray:
        self.counter += size
        return self._gen.choice(n, size=size, replace=replace)

    def __repr__(self) -> str:
        return f"RngState(seed={self.seed}, path={self.path}, counter={self.counter})"
