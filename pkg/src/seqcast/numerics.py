"""Dense array arithmetic, activations, and seeded random numbers.

Everything downstream (embedding, network forward/backward, training,
experiment aggregation) runs in 64-bit floats on top of this module.
Matrices are plain row-major numpy arrays; ``Matrix`` and ``Vector`` are
aliases kept for readability of signatures.

Random numbers come from :class:`Rng`, a counter-based SplitMix64 stream
(Steele, Lea & Flood 2014; the mixer used by Java's SplittableRandom and by
the xoshiro reference seeder).  The i-th 64-bit output is::

    mix64(seed + i * 0x9E3779B97F4A7C15)   (mod 2**64, i = 1, 2, ...)

which makes the stream a pure function of ``(seed, i)``: draws are
bit-identical across platforms and batch fills are vectorisable.  Doubles in
[0, 1) take the top 53 bits: ``(z >> 11) * 2**-53``.
"""

from __future__ import annotations

import math

import numpy as np

Matrix = np.ndarray  # 2-D float64, row-major
Vector = np.ndarray  # 1-D float64

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_TWO53 = float(1 << 53)


class Rng:
    """Deterministic SplitMix64 stream; identical seeds give identical draws."""

    def __init__(self, seed: int):
        if seed < 0:
            raise ValueError(f"seed must be a non-negative integer, got {seed}")
        self.seed = seed & _MASK64
        self._count = 0  # number of 64-bit outputs consumed so far

    def next_u64(self) -> int:
        self._count += 1
        z = (self.seed + self._count * _GAMMA) & _MASK64
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        return z ^ (z >> 31)

    def _u64_block(self, n: int) -> np.ndarray:
        # Vectorised batch: consumes stream positions _count+1 .. _count+n,
        # identical to n scalar next_u64() calls.
        idx = np.arange(self._count + 1, self._count + n + 1, dtype=np.uint64)
        self._count += n
        z = (np.uint64(self.seed) + idx * np.uint64(_GAMMA))
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))

    def random(self, size=None):
        """Doubles uniform on [0, 1), row-major fill for array shapes."""
        if size is None:
            return (self.next_u64() >> 11) / _TWO53
        shape = (size,) if isinstance(size, int) else tuple(size)
        n = math.prod(shape)
        u = (self._u64_block(n) >> np.uint64(11)).astype(np.float64) / _TWO53
        return u.reshape(shape)

    def uniform(self, low: float, high: float, size=None):
        return low + (high - low) * self.random(size)

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates shuffle of arange(n); one u64 draw per swap."""
        out = np.arange(n, dtype=np.int64)
        for i in range(n - 1, 0, -1):
            j = self.next_u64() % (i + 1)
            out[i], out[j] = out[j], out[i]
        return out


def matvec(m: Matrix, v: Vector) -> Vector:
    m = np.asarray(m, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if m.ndim != 2 or v.ndim != 1 or m.shape[1] != v.shape[0]:
        raise ValueError(
            f"matvec dimension mismatch: matrix {m.shape} vs vector {v.shape}")
    return m @ v


def sigmoid(v: Vector) -> Vector:
    """Elementwise logistic 1/(1+exp(-x)); saturates cleanly at the extremes."""
    v = np.asarray(v, dtype=np.float64)
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return out


def tanh_act(v: Vector) -> Vector:
    return np.tanh(np.asarray(v, dtype=np.float64))


def init_uniform(rng: Rng, rows: int, cols: int, bound: float) -> Matrix:
    """Matrix with i.i.d. entries uniform on [-bound, +bound], row-major draw order."""
    if bound <= 0:
        raise ValueError(f"bound must be positive, got {bound}")
    return rng.uniform(-bound, bound, (rows, cols))
