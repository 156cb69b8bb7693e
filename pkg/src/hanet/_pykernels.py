"""Pure-numpy kernels; same signatures as the compiled ``_kernels`` module.

Gate blocks in the fused matrices are ordered input, forget, output, cell
candidate. Backward kernels accumulate parameter gradients in place.
"""
import numpy as np

from .numerics import sigmoid_vec


def lstm_forward(Wx, Wh, b, x, h_prev, c_prev):
    H = h_prev.shape[0]
    a = Wx @ x + Wh @ h_prev + b
    gates = np.empty(4 * H)
    gates[: 3 * H] = sigmoid_vec(a[: 3 * H])
    gates[3 * H :] = np.tanh(a[3 * H :])
    i, f, g = gates[:H], gates[H : 2 * H], gates[3 * H :]
    c = f * c_prev + i * g
    h = gates[2 * H : 3 * H] * np.tanh(c)
    return gates, c, h


def lstm_backward(Wx, Wh, x, h_prev, c_prev, gates, c, dh, dc, dWx, dWh, db):
    H = h_prev.shape[0]
    i, f, o, g = gates[:H], gates[H : 2 * H], gates[2 * H : 3 * H], gates[3 * H :]
    tc = np.tanh(c)
    dct = dc + dh * o * (1.0 - tc * tc)
    da = np.empty(4 * H)
    da[:H] = dct * g * i * (1.0 - i)
    da[H : 2 * H] = dct * c_prev * f * (1.0 - f)
    da[2 * H : 3 * H] = dh * tc * o * (1.0 - o)
    da[3 * H :] = dct * i * (1.0 - g * g)
    dWx += np.outer(da, x)
    dWh += np.outer(da, h_prev)
    db += da
    return Wx.T @ da, Wh.T @ da, dct * f


def attention_forward(W, hp, hq, Rp, Rq):
    H = hp.shape[0]
    z = W[:, :H] @ hp + W[:, H:] @ hq
    e = np.exp(z - z.max())
    l = e / e.sum()
    return l, l @ Rp, l @ Rq


def attention_backward(W, hp, hq, Rp, Rq, l, dxp, dxq, dW):
    H = hp.shape[0]
    dl = Rp @ dxp + Rq @ dxq
    dz = l * (dl - l @ dl)
    dW[:, :H] += np.outer(dz, hp)
    dW[:, H:] += np.outer(dz, hq)
    return W[:, :H].T @ dz, W[:, H:].T @ dz
