"""LSTM cell: forward step and its analytic adjoint.

    i = sigmoid(W_ix x + W_ih h + b_i)
    f = sigmoid(W_fx x + W_fh h + b_f)
    o = sigmoid(W_ox x + W_oh h + b_o)
    g = tanh(W_gx x + W_gh h + b_g)
    c' = f * c + i * g
    h' = o * tanh(c')

The four gates share fused storage: ``Wx`` is (4H, D_in), ``Wh`` is (4H, H) and
``b`` is (4H,), stacked in i, f, o, g order. Per-gate matrices are views.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import DimensionError
from .numerics import check_finite

GATES = ("i", "f", "o", "g")
TENSOR_NAMES = (
    "W_ix", "W_fx", "W_ox", "W_gx",
    "W_ih", "W_fh", "W_oh", "W_gh",
    "b_i", "b_f", "b_o", "b_g",
)


@dataclass
class LstmParams:
    Wx: np.ndarray
    Wh: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        H4 = self.b.shape[0]
        if H4 % 4 or self.Wx.shape[0] != H4 or self.Wh.shape != (H4, H4 // 4):
            raise DimensionError(
                f"inconsistent LSTM shapes Wx={self.Wx.shape} Wh={self.Wh.shape} b={self.b.shape}"
            )

    @property
    def hidden(self) -> int:
        return self.b.shape[0] // 4

    @property
    def input_dim(self) -> int:
        return self.Wx.shape[1]

    @classmethod
    def zeros(cls, input_dim: int, hidden: int) -> "LstmParams":
        return cls(
            np.zeros((4 * hidden, input_dim)),
            np.zeros((4 * hidden, hidden)),
            np.zeros(4 * hidden),
        )

    @classmethod
    def init(cls, input_dim: int, hidden: int, rng: np.random.Generator) -> "LstmParams":
        """Uniform +-sqrt(6/(fan_in+fan_out)) per gate matrix, zero biases."""
        p = cls.zeros(input_dim, hidden)
        ax = np.sqrt(6.0 / (input_dim + hidden))
        ah = np.sqrt(6.0 / (2 * hidden))
        p.Wx[...] = rng.uniform(-ax, ax, size=p.Wx.shape)
        p.Wh[...] = rng.uniform(-ah, ah, size=p.Wh.shape)
        return p

    def zeros_like(self) -> "LstmParams":
        return LstmParams(np.zeros_like(self.Wx), np.zeros_like(self.Wh), np.zeros_like(self.b))

    def copy(self) -> "LstmParams":
        return LstmParams(self.Wx.copy(), self.Wh.copy(), self.b.copy())

    def tensors(self) -> dict[str, np.ndarray]:
        """The twelve per-gate tensors as writable views into fused storage."""
        H = self.hidden
        out = {}
        for n, gate in enumerate(GATES):
            rows = slice(n * H, (n + 1) * H)
            out[f"W_{gate}x"] = self.Wx[rows]
            out[f"W_{gate}h"] = self.Wh[rows]
            out[f"b_{gate}"] = self.b[rows]
        return {name: out[name] for name in TENSOR_NAMES}

    def __getattr__(self, name):
        if name in TENSOR_NAMES:
            return self.tensors()[name]
        raise AttributeError(name)


@dataclass
class LstmState:
    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, hidden: int) -> "LstmState":
        return cls(np.zeros(hidden), np.zeros(hidden))


@dataclass
class GateActivations:
    """Activated gates (fused i, f, o, g) and the new cell state."""

    gates: np.ndarray
    c: np.ndarray

    def _block(self, n):
        H = self.c.shape[0]
        return self.gates[n * H : (n + 1) * H]

    @property
    def i(self):
        return self._block(0)

    @property
    def f(self):
        return self._block(1)

    @property
    def o(self):
        return self._block(2)

    @property
    def g(self):
        return self._block(3)


def _check_shapes(params: LstmParams, prev: LstmState, x: np.ndarray) -> None:
    H = params.hidden
    if x.shape != (params.input_dim,):
        raise DimensionError(f"input shape {x.shape} does not match W_x {params.Wx.shape}")
    if prev.h.shape != (H,) or prev.c.shape != (H,):
        raise DimensionError(
            f"state shapes h={prev.h.shape} c={prev.c.shape} do not match hidden size {H}"
        )


def lstm_step(params: LstmParams, prev: LstmState, x: np.ndarray) -> tuple[LstmState, GateActivations]:
    x = np.ascontiguousarray(x, dtype=np.float64)
    _check_shapes(params, prev, x)
    check_finite("x", x)
    check_finite("h_prev", prev.h)
    check_finite("c_prev", prev.c)
    gates, c, h = _backend.kernels.lstm_forward(params.Wx, params.Wh, params.b, x, prev.h, prev.c)
    return LstmState(h, c), GateActivations(gates, c)


def lstm_step_backward(
    params: LstmParams,
    prev: LstmState,
    x: np.ndarray,
    gates: GateActivations,
    grad_h: np.ndarray,
    grad_c: np.ndarray,
    grads: LstmParams | None = None,
) -> tuple[LstmParams, LstmState, np.ndarray]:
    """Reverse-mode step. Parameter gradients accumulate into ``grads`` if given."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    _check_shapes(params, prev, x)
    H = params.hidden
    if grad_h.shape != (H,) or grad_c.shape != (H,) or gates.gates.shape != (4 * H,):
        raise DimensionError(
            f"gradient shapes grad_h={grad_h.shape} grad_c={grad_c.shape} "
            f"gates={gates.gates.shape} do not match hidden size {H}"
        )
    if grads is None:
        grads = params.zeros_like()
    dx, dh_prev, dc_prev = _backend.kernels.lstm_backward(
        params.Wx, params.Wh, x, prev.h, prev.c, gates.gates, gates.c,
        np.ascontiguousarray(grad_h, dtype=np.float64),
        np.ascontiguousarray(grad_c, dtype=np.float64),
        grads.Wx, grads.Wh, grads.b,
    )
    return grads, LstmState(dh_prev, dc_prev), dx
