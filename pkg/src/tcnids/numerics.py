"""Dense float64 tensor helpers, seeded RNG and parameter initialisation.

Tensors are plain C-contiguous ``numpy.ndarray`` objects of dtype float64.
"""
from __future__ import annotations

import zlib

import numpy as np

from .errors import ArgumentError, DimensionError

DTYPE = np.float64


def as_tensor(values) -> np.ndarray:
    t = np.ascontiguousarray(values, dtype=DTYPE)
    if t.ndim == 0:
        t = t.reshape(1)
    if any(n < 1 for n in t.shape):
        raise DimensionError(f"tensor extents must be >= 1, got shape {t.shape}")
    return t


def check_finite(t: np.ndarray, what: str = "tensor") -> np.ndarray:
    if not np.all(np.isfinite(t)):
        raise FloatingPointError(f"{what} contains non-finite values")
    return t


class Rng:
    """Seeded PCG64 stream.

    ``child(name)`` derives an independent stream for a named stage so that a
    stage can be rerun on its own and still see the same numbers.
    """

    def __init__(self, seed: int, stream: tuple[int, ...] = ()):
        if seed < 0 or seed >= 2**64:
            raise ArgumentError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = int(seed)
        self.stream = tuple(stream)
        ss = np.random.SeedSequence(self.seed, spawn_key=self.stream)
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def child(self, name: str) -> "Rng":
        return Rng(self.seed, self.stream + (zlib.crc32(name.encode("utf-8")),))

    def uniform(self, low, high, size) -> np.ndarray:
        return self.generator.uniform(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None) -> np.ndarray:
        return self.generator.normal(loc, scale, size)

    def random(self, size=None):
        return self.generator.random(size)

    def permutation(self, n: int) -> np.ndarray:
        return self.generator.permutation(n)

    def choice(self, n: int, size: int, replace: bool = False, p=None) -> np.ndarray:
        return self.generator.choice(n, size=size, replace=replace, p=p)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``c[i, j] = sum_k a[i, k] * b[k, j]`` for 2-D operands."""
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply shapes {a.shape} and {b.shape}")
    return np.ascontiguousarray(a @ b)


_OPS = {
    "add": np.add,
    "sub": np.subtract,
    "mul": np.multiply,
}


def elementwise(op: str, a: np.ndarray, b) -> np.ndarray:
    """Pointwise ``add``/``sub``/``mul`` of equal shapes, or ``scale`` by a scalar.

    A scalar ``b`` is broadcast for every op; no other broadcasting is done.
    """
    a = np.asarray(a, dtype=DTYPE)
    if op == "scale":
        if not np.isscalar(b):
            raise DimensionError("scale expects a scalar factor")
        return a * float(b)
    if op not in _OPS:
        raise ArgumentError(f"unknown elementwise op {op!r}")
    if np.isscalar(b):
        return _OPS[op](a, float(b))
    b = np.asarray(b, dtype=DTYPE)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch for {op}: {a.shape} vs {b.shape}")
    return _OPS[op](a, b)


def glorot_uniform(rng: Rng, fan_in: int, fan_out: int, shape) -> np.ndarray:
    if fan_in < 1 or fan_out < 1:
        raise ArgumentError(f"fans must be >= 1, got fan_in={fan_in}, fan_out={fan_out}")
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return np.ascontiguousarray(rng.uniform(-limit, limit, tuple(shape)), dtype=DTYPE)
