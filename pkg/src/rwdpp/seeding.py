"""Counter-based 64-bit seed derivation.

Every random quantity in the package is a pure function of a master seed
and a tuple of integer indices, obtained by chaining the SplitMix64
finalizer.  No generator state is ever carried between calls, so lazy
queries, reorderings and worker splits all reproduce the same bits.
"""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

_U = np.uint64
_GOLDEN = _U(GOLDEN)
_C1 = _U(_M1)
_C2 = _U(_M2)
_S30, _S27, _S31 = _U(30), _U(27), _U(31)
_S11 = _U(11)
_INV53 = 1.0 / float(1 << 53)

# role tags, fixed forever: changing one changes every report
TAG_SITE = 0x51
TAG_INPUT = 0x52
TAG_RESAMPLE = 0x53
TAG_ENV = 0x54
TAG_WALK = 0x61
TAG_CLOCK = 0x62
TAG_JITTER = 0x63
TAG_TASK = 0x71


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a Python int."""
    z = (z + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def derive(master: int, tag: int, *indices: int) -> int:
    """Scalar seed for ``(master, tag, indices...)``."""
    h = mix64((master & MASK64) ^ mix64(tag))
    for i in indices:
        h = mix64(h ^ (int(i) & MASK64))
    return h


def mix64_array(z: np.ndarray) -> np.ndarray:
    """Vectorized SplitMix64 finalizer (uint64 arithmetic wraps)."""
    with np.errstate(over="ignore"):
        z = z + _GOLDEN
        z = (z ^ (z >> _S30)) * _C1
        z = (z ^ (z >> _S27)) * _C2
    return z ^ (z >> _S31)


def as_u64(a) -> np.ndarray:
    """Two's-complement view of signed integers as uint64."""
    return np.asarray(a, dtype=np.int64).astype(np.uint64)


def derive_array(base, *indices) -> np.ndarray:
    """Vectorized counterpart of ``derive`` starting from a derived base.

    ``base`` is a uint64 scalar or array obtained from ``derive(master, tag)``
    (or a per-environment array of such values); ``indices`` broadcast.
    """
    h = np.asarray(base, dtype=np.uint64)
    for i in indices:
        h = mix64_array(h ^ as_u64(i))
    return h


def to_uniform(h: np.ndarray) -> np.ndarray:
    """Map 64-bit hashes to doubles in [0, 1) using the top 53 bits."""
    return (h >> _S11).astype(np.float64) * _INV53


def stream_uniforms(key, counter) -> np.ndarray:
    """Uniforms of SplitMix64 streams: element ``counter`` of stream ``key``."""
    with np.errstate(over="ignore"):
        state = np.asarray(key, dtype=np.uint64) + as_u64(counter) * _GOLDEN
    return to_uniform(mix64_array(state))


class Seed:
    """A 64-bit master seed with role-tagged child derivation."""

    __slots__ = ("master",)

    def __init__(self, master: int):
        if not 0 <= int(master) <= MASK64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {master}")
        self.master = int(master)

    def child(self, tag: int, *indices: int) -> "Seed":
        return Seed(derive(self.master, tag, *indices))

    def key(self, tag: int, *indices: int) -> int:
        return derive(self.master, tag, *indices)

    def __int__(self) -> int:
        return self.master

    def __eq__(self, other) -> bool:
        return isinstance(other, Seed) and other.master == self.master

    def __hash__(self) -> int:
        return hash(self.master)

    def __repr__(self) -> str:
        return f"Seed({self.master})"


def as_seed(seed) -> Seed:
    return seed if isinstance(seed, Seed) else Seed(int(seed))
