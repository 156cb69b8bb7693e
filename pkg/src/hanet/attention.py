"""Joint soft spatial attention over the K*K regions of a frame.

One weight vector per frame is computed from the concatenated previous
layer-1 hidden states of both streams and applied to both feature cubes.
A cube is stored region-major: shape (K*K, D), row i is region i.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import DimensionError


@dataclass
class AttentionParams:
    W: np.ndarray  # (K*K, 2H)

    @property
    def regions(self) -> int:
        return self.W.shape[0]

    @classmethod
    def zeros(cls, regions: int, hidden: int) -> "AttentionParams":
        return cls(np.zeros((regions, 2 * hidden)))

    @classmethod
    def init(cls, regions: int, hidden: int, rng: np.random.Generator) -> "AttentionParams":
        a = np.sqrt(6.0 / (regions + 2 * hidden))
        return cls(rng.uniform(-a, a, size=(regions, 2 * hidden)))


def _check(params: AttentionParams, h_p: np.ndarray, h_q: np.ndarray) -> None:
    H = h_p.shape[0]
    if h_q.shape != (H,) or params.W.shape[1] != 2 * H:
        raise DimensionError(
            f"attention weights {params.W.shape} incompatible with hidden states "
            f"{h_p.shape} and {h_q.shape}"
        )


def _check_cube(l: np.ndarray, cube: np.ndarray) -> None:
    if cube.ndim != 2 or cube.shape[0] != l.shape[0]:
        raise DimensionError(f"weights of length {l.shape[0]} do not match cube {cube.shape}")


def attention_weights(params: AttentionParams, h_p_prev: np.ndarray, h_q_prev: np.ndarray) -> np.ndarray:
    _check(params, h_p_prev, h_q_prev)
    z = params.W @ np.concatenate([h_p_prev, h_q_prev])
    e = np.exp(z - z.max())
    return e / e.sum()


def attend(l: np.ndarray, cube: np.ndarray) -> np.ndarray:
    """Weighted average of the region vectors of ``cube``."""
    _check_cube(l, cube)
    return l @ cube


def attention_forward(params, h_p_prev, h_q_prev, cube_p, cube_q):
    """Weights and both attended inputs in one pass: ``(l, x_p, x_q)``."""
    _check(params, h_p_prev, h_q_prev)
    if cube_p.shape != cube_q.shape or cube_p.shape[0] != params.regions:
        raise DimensionError(
            f"cubes {cube_p.shape} / {cube_q.shape} do not match {params.regions} regions"
        )
    return _backend.kernels.attention_forward(params.W, h_p_prev, h_q_prev, cube_p, cube_q)


def attention_backward(
    params: AttentionParams,
    h_p_prev: np.ndarray,
    h_q_prev: np.ndarray,
    cube_p: np.ndarray,
    cube_q: np.ndarray,
    grad_x_p: np.ndarray,
    grad_x_q: np.ndarray,
    l: np.ndarray | None = None,
    grads: AttentionParams | None = None,
) -> tuple[AttentionParams, np.ndarray, np.ndarray]:
    """Gradients w.r.t. ``W`` and both previous hidden states.

    The hidden-state gradients feed back into the previous time step, a
    recurrent path parallel to the LSTM's own.
    """
    _check(params, h_p_prev, h_q_prev)
    if l is None:
        l = attention_weights(params, h_p_prev, h_q_prev)
    _check_cube(l, cube_p)
    _check_cube(l, cube_q)
    if grads is None:
        grads = AttentionParams(np.zeros_like(params.W))
    dhp, dhq = _backend.kernels.attention_backward(
        params.W, h_p_prev, h_q_prev, cube_p, cube_q, l,
        np.ascontiguousarray(grad_x_p, dtype=np.float64),
        np.ascontiguousarray(grad_x_q, dtype=np.float64),
        grads.W,
    )
    return grads, dhp, dhq
