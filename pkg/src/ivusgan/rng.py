"""Deterministic counter-based random number generation.

Every stochastic choice in this package (weight init, dropout masks, phantom
textures, shuffling) flows through :class:`Rng`, a counter-based generator
built on the SplitMix64 mixing function.  The i-th raw 64-bit word of a
stream with seed ``s`` is::

    word(i) = mix64(s + (i + 1) * GOLDEN)          (all arithmetic mod 2**64)

with ``GOLDEN = 0x9E3779B97F4A7C15`` and ``mix64`` the SplitMix64 finalizer
(constants ``0xBF58476D1CE4E5B9`` and ``0x94D049BB133111EB``).  Because each
word is a pure function of (seed, counter), streams are reproducible
bit-for-bit on any platform and independent sub-streams can be carved out by
key without coordination.

Uniform doubles take the top 53 bits of a word (giving [0, 1)).  Normal
deviates are the Irwin-Hall sum of 12 uniforms minus 6: mean 0, variance 1,
support [-6, 6].  The sum uses only IEEE additions in a fixed order, so
normal streams are also bitwise portable; the truncated tail is irrelevant
for weight initialisation and texture synthesis, which is all this package
uses normals for.
"""

from __future__ import annotations

import hashlib

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)


def mix64(z):
    """SplitMix64 finalizer on uint64 scalars or arrays (wrapping mod 2**64)."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


def _fold_key(state: np.uint64, key) -> np.uint64:
    """Fold one sub-stream key (int or str) into a seed word."""
    if isinstance(key, str):
        digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
        word = np.uint64(int.from_bytes(digest, "little"))
    elif isinstance(key, (int, np.integer)):
        word = np.uint64(int(key) & 0xFFFFFFFFFFFFFFFF)
    else:
        raise TypeError(f"sub-stream key must be int or str, got {type(key).__name__}")
    with np.errstate(over="ignore"):
        return np.uint64(mix64((state ^ word) + GOLDEN))


class Rng:
    """Counter-based deterministic random stream.

    Parameters
    ----------
    seed : int
        64-bit stream seed.  Same seed, same stream, on every platform.

    Sub-streams: ``rng.split("dropout", 3)`` derives a new, statistically
    independent Rng keyed by the given ints/strings.  Splitting never
    advances the parent stream.
    """

    __slots__ = ("_seed", "_counter")

    def __init__(self, seed: int, _counter: int = 0):
        self._seed = np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)
        self._counter = int(_counter)

    def __repr__(self):
        return f"Rng(seed=0x{int(self._seed):016x}, counter={self._counter})"

    def split(self, *keys) -> "Rng":
        """Derive an independent sub-stream keyed by ints and/or strings."""
        state = self._seed
        for key in keys:
            state = _fold_key(state, key)
        return Rng(int(state))

    def _words(self, n: int) -> np.ndarray:
        idx = np.arange(self._counter + 1, self._counter + n + 1, dtype=np.uint64)
        self._counter += n
        with np.errstate(over="ignore"):
            return mix64(self._seed + idx * GOLDEN)

    def uniform(self, shape=()) -> np.ndarray:
        """Doubles in [0, 1), shape as requested (scalar ndarray for ())."""
        shape = (shape,) if isinstance(shape, (int, np.integer)) else tuple(shape)
        n = int(np.prod(shape)) if shape else 1
        bits = self._words(n) >> np.uint64(11)
        out = bits.astype(np.float64) * (2.0 ** -53)
        return out.reshape(shape) if shape else out[0]

    def normal(self, shape=(), mean: float = 0.0, std: float = 1.0) -> np.ndarray:
        """Irwin-Hall(12) approximate standard normals, scaled and shifted."""
        shape = (shape,) if isinstance(shape, (int, np.integer)) else tuple(shape)
        n = int(np.prod(shape)) if shape else 1
        u = self.uniform((n, 12))
        z = np.zeros(n, dtype=np.float64)
        for j in range(12):  # fixed summation order: bitwise reproducible
            z = z + u[:, j]
        z -= 6.0
        out = mean + std * z
        return out.reshape(shape) if shape else out[0]

    def integers(self, low: int, high: int, shape=()) -> np.ndarray:
        """Integers in [low, high).  Bias from the float path is < 2**-53."""
        if high <= low:
            raise ValueError(f"empty integer range [{low}, {high})")
        u = self.uniform(shape)
        return (low + np.floor(u * (high - low))).astype(np.int64)

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates permutation of range(n)."""
        perm = np.arange(n, dtype=np.int64)
        if n < 2:
            return perm
        draws = self.uniform(n - 1)
        for i in range(n - 1, 0, -1):
            j = int(draws[n - 1 - i] * (i + 1))
            perm[i], perm[j] = perm[j], perm[i]
        return perm
