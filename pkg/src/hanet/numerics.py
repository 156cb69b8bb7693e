"""Scalar and vector primitives plus the central-difference gradient oracle.

All arrays are float64. Random streams come from Philox, a counter-based
generator whose output is defined by (key, counter) alone, so draws are
identical across runs and platforms for a given seed.
"""
from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .errors import DimensionError, NumericError

RNG_ALGORITHM = "numpy.random.Philox-4x64-10"

_MASK64 = (1 << 64) - 1


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Return a Philox generator keyed by ``(seed, stream)``.

    Distinct ``stream`` values give independent streams for the same seed
    (parameter init, shuffling, dropout, data generation).
    """
    key = np.array([seed & _MASK64, stream & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def sigmoid(x: float) -> float:
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


def sigmoid_vec(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    z = np.exp(v[~pos])
    out[~pos] = z / (1.0 + z)
    return out


def stable_softmax(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1 or z.shape[0] == 0:
        raise DimensionError(f"softmax needs a non-empty vector, got shape {z.shape}")
    e = np.exp(z - z.max())
    return e / e.sum()


def matvec(M: np.ndarray, v: np.ndarray) -> np.ndarray:
    M = np.asarray(M, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if M.ndim != 2 or v.ndim != 1 or M.shape[1] != v.shape[0]:
        raise DimensionError(f"matvec shape mismatch: matrix {M.shape} vs vector {v.shape}")
    return M @ v


def hadamard(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"hadamard shape mismatch: {a.shape} vs {b.shape}")
    return a * b


def tanh_vec(v: np.ndarray) -> np.ndarray:
    return np.tanh(np.asarray(v, dtype=np.float64))


def check_finite(name: str, arr: np.ndarray) -> None:
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite values in {name}")


def finite_diff_gradient(
    f: Callable[[np.ndarray], float], theta: np.ndarray, h: float = 1e-5
) -> np.ndarray:
    """Central-difference gradient of scalar ``f`` at ``theta``.

    ``theta`` is perturbed in place and restored after each coordinate, so
    callers may pass a view into live parameter storage.
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    flat = theta.reshape(-1)
    if not np.shares_memory(flat, theta):
        raise ValueError("theta must be reshapeable to a flat view")
    grad = np.zeros(flat.shape[0], dtype=np.float64)
    for i in range(flat.shape[0]):
        old = flat[i]
        flat[i] = old + h
        fp = f(theta)
        flat[i] = old - h
        fm = f(theta)
        flat[i] = old
        if not (math.isfinite(fp) and math.isfinite(fm)):
            raise NumericError(f"objective not finite at coordinate {i}")
        grad[i] = (fp - fm) / (2.0 * h)
    return grad.reshape(theta.shape)


def relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-8) -> np.ndarray:
    """Element-wise ``|a-b| / max(|a|, |b|, floor)``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
