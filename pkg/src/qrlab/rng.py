"""Counter-based SplitMix64 streams.

The k-th output (k = 1, 2, ...) of the stream with seed ``s`` is
``mix(s + k * GAMMA)`` where ``mix`` is the SplitMix64 finaliser.  Because
the stream is counter based, any output can be computed directly, which is
what makes per-task streams (seed + task index) independent of how a batch
is partitioned.
"""

from __future__ import annotations

import numpy as np

GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK = (1 << 64) - 1


def _mix(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def as_seed(seed) -> np.uint64:
    return np.uint64(int(seed) & _MASK)


def derive_seed(seed, index) -> int:
    """Seed of the ``index``-th task stream: ``seed + index`` modulo 2**64."""
    return (int(seed) + int(index)) & _MASK


def task_seeds(seed, count: int, start: int = 0) -> np.ndarray:
    """Seeds of tasks ``start .. start+count-1`` as a uint64 array."""
    base = np.uint64(derive_seed(seed, start))
    with np.errstate(over="ignore"):
        return base + np.arange(count, dtype=np.uint64)


def hash_seed(seed, *salts) -> int:
    """Fold extra integers into a seed with the SplitMix64 finaliser."""
    z = np.array([int(seed) & _MASK], dtype=np.uint64)
    for s in salts:
        with np.errstate(over="ignore"):
            z = _mix(z ^ np.uint64(int(s) & _MASK)) + GAMMA
    return int(z[0])


def u64(seeds, count: int) -> np.ndarray:
    """First ``count`` outputs of each stream; shape ``seeds.shape + (count,)``."""
    seeds = np.asarray(seeds, dtype=np.uint64)[..., None]
    k = np.arange(1, count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix(seeds + k * GAMMA)


def uniform(seeds, count: int) -> np.ndarray:
    """Doubles in [0, 1) with 53 random bits."""
    return (u64(seeds, count) >> np.uint64(11)).astype(np.float64) * 2.0**-53


def normal(seeds, count: int) -> np.ndarray:
    """Standard normals by Box-Muller, two uniforms per output."""
    u = uniform(seeds, 2 * count)
    u1 = 1.0 - u[..., 0::2]
    u2 = u[..., 1::2]
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


class SplitMix64:
    """Sequential view of one stream, for code that draws in several steps."""

    def __init__(self, seed):
        self.seed = int(seed) & _MASK
        self.pos = 0

    def _take(self, count: int) -> np.ndarray:
        base = (self.seed + self.pos * int(GAMMA)) & _MASK
        self.pos += count
        return u64(np.uint64(base), count)

    def uniform(self, *shape) -> np.ndarray:
        count = int(np.prod(shape)) if shape else 1
        out = (self._take(count) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return out.reshape(shape) if shape else out[0]

    def normal(self, *shape) -> np.ndarray:
        count = int(np.prod(shape)) if shape else 1
        u = self.uniform(2 * count)
        z = np.sqrt(-2.0 * np.log(1.0 - u[0::2])) * np.cos(2.0 * np.pi * u[1::2])
        return z.reshape(shape) if shape else z[0]

    def directions(self, count: int, dim: int) -> np.ndarray:
        """Uniform unit vectors in R^dim, shape (count, dim)."""
        z = self.normal(count, dim)
        return z / np.linalg.norm(z, axis=-1, keepdims=True)

    def ball(self, count: int, dim: int, radius: float = 1.0) -> np.ndarray:
        """Uniform points in the Euclidean ball of the given radius."""
        d = self.directions(count, dim)
        r = radius * self.uniform(count) ** (1.0 / dim)
        return d * r[:, None]
