import numpy as np
import pytest

from hanet import _pykernels
from hanet.numerics import make_rng

_kernels = pytest.importorskip("hanet._kernels")


@pytest.mark.parametrize("seed", range(5))
def test_lstm_kernels_agree(seed):
    rng = make_rng(seed)
    D, H = 3 + seed, 2 + seed
    Wx, Wh, b = rng.standard_normal((4 * H, D)), rng.standard_normal((4 * H, H)), rng.standard_normal(4 * H)
    x, h, c = rng.standard_normal(D), rng.standard_normal(H), rng.standard_normal(H)
    fa = _pykernels.lstm_forward(Wx, Wh, b, x, h, c)
    fb = _kernels.lstm_forward(Wx, Wh, b, x, h, c)
    for a, bb in zip(fa, fb):
        np.testing.assert_allclose(a, bb, rtol=1e-13, atol=1e-14)
    dh, dc = rng.standard_normal(H), rng.standard_normal(H)
    acc_a = [np.zeros_like(Wx), np.zeros_like(Wh), np.zeros_like(b)]
    acc_b = [np.zeros_like(Wx), np.zeros_like(Wh), np.zeros_like(b)]
    ra = _pykernels.lstm_backward(Wx, Wh, x, h, c, fa[0], fa[1], dh, dc, *acc_a)
    rb = _kernels.lstm_backward(Wx, Wh, x, h, c, fa[0], fa[1], dh, dc, *acc_b)
    for a, bb in zip(list(ra) + acc_a, list(rb) + acc_b):
        np.testing.assert_allclose(a, bb, rtol=1e-12, atol=1e-13)


@pytest.mark.parametrize("seed", range(5))
def test_attention_kernels_agree(seed):
    rng = make_rng(seed, 1)
    R, H, D = 1 + seed * 3, 3, 4
    W = rng.standard_normal((R, 2 * H))
    hp, hq = rng.standard_normal(H), rng.standard_normal(H)
    Rp, Rq = rng.standard_normal((R, D)), rng.standard_normal((R, D))
    fa = _pykernels.attention_forward(W, hp, hq, Rp, Rq)
    fb = _kernels.attention_forward(W, hp, hq, Rp, Rq)
    for a, bb in zip(fa, fb):
        np.testing.assert_allclose(a, bb, rtol=1e-13, atol=1e-15)
    dxp, dxq = rng.standard_normal(D), rng.standard_normal(D)
    dWa, dWb = np.zeros_like(W), np.zeros_like(W)
    ra = _pykernels.attention_backward(W, hp, hq, Rp, Rq, fa[0], dxp, dxq, dWa)
    rb = _kernels.attention_backward(W, hp, hq, Rp, Rq, fa[0], dxp, dxq, dWb)
    for a, bb in zip(list(ra) + [dWa], list(rb) + [dWb]):
        np.testing.assert_allclose(a, bb, rtol=1e-12, atol=1e-14)


def test_backend_selection_env(monkeypatch):
    import importlib

    import hanet._backend as be

    monkeypatch.setenv("HANET_BACKEND", "python")
    importlib.reload(be)
    assert be.BACKEND == "python" and be.kernels is _pykernels
    monkeypatch.delenv("HANET_BACKEND")
    importlib.reload(be)
    assert be.BACKEND == "compiled"
