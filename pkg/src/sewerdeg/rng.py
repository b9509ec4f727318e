"""Counter-based SplitMix64 random streams.

Every random draw in the package comes from a :class:`Stream`.  A stream is a
64-bit key plus a counter; the ``i``-th raw output of a stream is::

    mix64(key + (i + 1) * GAMMA)        (all arithmetic mod 2**64)

with ``GAMMA = 0x9E3779B97F4A7C15`` and the SplitMix64 finalizer::

    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    z =  z ^ (z >> 31)

Sub-streams are derived by hashing a path of labels into the key::

    key(seed)            = mix64(seed)
    key(parent, label)   = mix64(parent_key ^ mix64(label64 + GAMMA))

where integer labels are taken mod 2**64 and string labels are first reduced
with 64-bit FNV-1a over their UTF-8 bytes.  Uniform doubles use the top 53
bits: ``(raw >> 11) * 2**-53``.  Because the output depends only on
``(key, counter)``, streams can be consumed in any order or in parallel and
still reproduce identically.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB
FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3

_U53 = 1.0 / (1 << 53)


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def fnv1a64(text: str) -> int:
    h = FNV_OFFSET
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * FNV_PRIME) & MASK64
    return h


def _label64(label) -> int:
    if isinstance(label, str):
        return fnv1a64(label)
    return int(label) & MASK64


def _mix64_array(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX2)
        return z ^ (z >> np.uint64(31))


class Stream:
    """A reproducible random stream identified by ``(seed, *path)``."""

    def __init__(self, seed: int, *path):
        key = mix64(int(seed))
        for label in path:
            key = mix64(key ^ mix64(_label64(label) + GAMMA))
        self.key = key
        self.counter = 0

    @classmethod
    def _from_key(cls, key: int) -> "Stream":
        s = cls.__new__(cls)
        s.key = key
        s.counter = 0
        return s

    def spawn(self, *path) -> "Stream":
        """Independent child stream; does not advance this stream."""
        key = self.key
        for label in path:
            key = mix64(key ^ mix64(_label64(label) + GAMMA))
        return Stream._from_key(key)

    def raw(self, n: int) -> np.ndarray:
        ctr = np.arange(self.counter + 1, self.counter + 1 + n, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            z = np.uint64(self.key) + ctr * np.uint64(GAMMA)
        return _mix64_array(z)

    def uniform(self, n: int | None = None, low: float = 0.0, high: float = 1.0):
        size = 1 if n is None else n
        u = (self.raw(size) >> np.uint64(11)).astype(np.float64) * _U53
        u = low + (high - low) * u
        return float(u[0]) if n is None else u

    def normal(self, n: int) -> np.ndarray:
        # Box-Muller; 1 - u keeps the log argument in (0, 1].
        u1 = self.uniform(n)
        u2 = self.uniform(n)
        return np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)

    def integers(self, high: int, n: int) -> np.ndarray:
        """Integers uniform on ``[0, high)``."""
        out = np.floor(self.uniform(n) * high).astype(np.int64)
        return np.minimum(out, high - 1)

    def permutation(self, n: int) -> np.ndarray:
        return np.argsort(self.uniform(n), kind="stable")

    def choice(self, probabilities, n: int) -> np.ndarray:
        """Indices drawn with the given (normalised) probabilities."""
        p = np.asarray(probabilities, dtype=np.float64)
        cdf = np.cumsum(p / p.sum())
        idx = np.searchsorted(cdf, self.uniform(n), side="right")
        return np.minimum(idx, len(p) - 1)

    def bernoulli(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=np.float64)
        return (self.uniform(p.size).reshape(p.shape) < p).astype(np.int64)
