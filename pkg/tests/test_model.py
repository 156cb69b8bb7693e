import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hanet.errors import ConfigError, ConsistencyError, DimensionError, EmptySequenceError
from hanet.gradcheck import TINY, analytic_grads, check_gradients, tiny_problem
from hanet.model import HanModel, ModelConfig, backward, forward, layer2_schedule, with_attention
from hanet.numerics import finite_diff_gradient, make_rng, relative_error
from hanet.training import nll_from_logits
from oracles import TorchHan, stacked_lstm_final


def test_schedule_examples():
    assert layer2_schedule(4, 2) == [2, 4]
    assert layer2_schedule(3, 2) == [2, 3]
    assert layer2_schedule(5, 1) == [1, 2, 3, 4, 5]
    assert layer2_schedule(1, 7) == [1]
    with pytest.raises(EmptySequenceError):
        layer2_schedule(0, 2)
    with pytest.raises(ConfigError):
        layer2_schedule(3, 0)


@given(st.integers(1, 200), st.integers(1, 50))
def test_schedule_property(T, k):
    S = layer2_schedule(T, k)
    assert max(S) == T and S == sorted(set(S))
    assert len(S) == T // k + (1 if T % k else 0)
    assert all(s % k == 0 for s in S[:-1])


def _inputs(cfg, seed=0):
    rng = make_rng(seed, 9)
    shape = (cfg.T, cfg.regions, cfg.D)
    return rng.standard_normal(shape), rng.standard_normal(shape)


def test_zero_model_uniform(backend):
    cfg = ModelConfig(K=2, D=3, H=4, k=2, T=5, C=4)
    probs, enc, _ = forward(HanModel.zeros(cfg), *_inputs(cfg))
    np.testing.assert_array_equal(probs, 0.25)
    np.testing.assert_array_equal(enc.h_f, 0)


def test_single_frame_steps_each_layer_once():
    cfg = ModelConfig(K=2, D=3, H=4, k=5, T=1, C=2)
    _, _, tr = forward(HanModel.init(cfg, 1), *_inputs(cfg))
    assert tr.schedule == [1]
    assert tr.gates_p1.shape[0] == 1 and tr.gates_p2.shape[0] == 1
    np.testing.assert_array_equal(tr.in_p2[0], tr.h_p1[1])


@pytest.mark.parametrize("seed", range(10))
def test_k1_matches_stacked_lstm(seed, backend):
    rng = make_rng(seed, 20)
    cfg = ModelConfig(K=int(rng.integers(1, 4)), D=int(rng.integers(1, 5)), H=int(rng.integers(1, 6)),
                      k=1, T=int(rng.integers(1, 8)), C=int(rng.integers(2, 5)))
    model = HanModel.init(cfg, seed)
    cp, cq = _inputs(cfg, seed)
    _, enc, tr = forward(model, cp, cq)
    ref = stacked_lstm_final(model, tr.x_p, tr.x_q)
    np.testing.assert_allclose(enc.h_f, ref, rtol=0, atol=1e-10)


@pytest.mark.parametrize("k", [1, 2, 3])
@pytest.mark.parametrize("attention", [True, False])
def test_gradients_match_torch_oracle(k, attention, backend):
    cfg = ModelConfig(K=2, D=4, H=5, k=k, T=6, C=3, attention=attention)
    model, batch = tiny_problem(cfg, seed=k)
    ours = analytic_grads(model, batch).blocks()
    ref = TorchHan(model)
    theirs = ref.grads(batch)
    for name, g in ours.items():
        np.testing.assert_allclose(g, theirs[name], rtol=1e-10, atol=1e-13, err_msg=name)
    total = sum(nll_from_logits(forward(model, cp, cq)[2].logits, y)[0] for cp, cq, y in batch)
    assert abs(total - sum(ref.loss(cp, cq, y).item() for cp, cq, y in batch)) < 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_full_gradcheck_random_configs(seed):
    rng = make_rng(seed, 30)
    cfg = ModelConfig(K=int(rng.integers(1, 3)), D=int(rng.integers(2, 5)), H=int(rng.integers(2, 5)),
                      k=int(rng.integers(1, 4)), T=int(rng.integers(2, 7)), C=int(rng.integers(2, 4)))
    model, batch = tiny_problem(cfg, seed)
    results = check_gradients(model, batch)
    assert all(r.passed for r in results), [r for r in results if not r.passed]


def test_gradcheck_python_backend(backend):
    model, batch = tiny_problem(TINY, 3)
    assert all(r.passed for r in check_gradients(model, batch))


def test_gradcheck_detects_corruption():
    model, batch = tiny_problem(TINY, 0)
    res = {r.name: r.passed for r in check_gradients(model, batch, corrupt="q2.W_oh")}
    assert not res["q2.W_oh"]
    assert sum(not v for v in res.values()) == 1


def test_dropout_gradients_with_fixed_masks(backend):
    cfg = ModelConfig(K=2, D=3, H=4, k=2, T=5, C=3)
    model = HanModel.init(cfg, 4)
    cp, cq = _inputs(cfg, 4)

    def loss(_):
        _, _, tr = forward(model, cp, cq, "train", make_rng(99, 3), 0.4)
        return nll_from_logits(tr.logits, 1)[0]

    _, _, tr = forward(model, cp, cq, "train", make_rng(99, 3), 0.4)
    assert tr.mask_f is not None and (tr.mask_f == 0).any()
    grads = backward(model, tr, nll_from_logits(tr.logits, 1)[1]).blocks()
    # a mask applied wrongly shows up as an O(1) error; 1e-9 absolute is the FD noise floor
    for name, view in model.blocks().items():
        num = finite_diff_gradient(loss, view, 1e-4)
        np.testing.assert_allclose(grads[name], num, rtol=1e-4, atol=1e-9, err_msg=name)


def test_zero_upstream_gives_zero_grads():
    cfg = ModelConfig(K=2, D=3, H=4, k=2, T=5, C=3)
    model = HanModel.init(cfg, 0)
    _, _, tr = forward(model, *_inputs(cfg))
    g = backward(model, tr, np.zeros(3))
    assert not any(a.any() for a in g.parameters().values())


def test_probs_and_encoding_ranges():
    cfg = ModelConfig(K=3, D=4, H=6, k=3, T=7, C=5)
    for seed in range(5):
        model = HanModel.init(cfg, seed)
        for arr in model.parameters().values():
            arr *= 4.0  # push toward saturation
        probs, enc, _ = forward(model, *_inputs(cfg, seed))
        assert abs(probs.sum() - 1) <= 1e-12 and np.all(probs > 0)
        assert np.all(np.abs(enc.h_f) < 1)


def test_forward_backward_deterministic():
    model, batch = tiny_problem(TINY, 2)
    a = analytic_grads(model, batch).parameters()
    b = analytic_grads(model, batch).parameters()
    for name in a:
        assert a[name].tobytes() == b[name].tobytes()


def test_attention_disabled_is_uniform():
    cfg = ModelConfig(K=3, D=2, H=3, k=2, T=4, C=2)
    model = with_attention(HanModel.init(cfg, 0), False)
    _, _, tr = forward(model, *_inputs(cfg))
    np.testing.assert_array_equal(tr.attn, 1.0 / 9)


def test_input_errors():
    cfg = ModelConfig(K=2, D=3, H=4, k=2, T=5, C=3)
    model = HanModel.init(cfg, 0)
    cp, cq = _inputs(cfg)
    with pytest.raises(DimensionError, match="lengths differ"):
        forward(model, cp, cq[:4])
    with pytest.raises(EmptySequenceError):
        forward(model, cp[:0], cq[:0])
    with pytest.raises(DimensionError):
        forward(model, cp[:, :, :2], cq[:, :, :2])
    other = HanModel.init(ModelConfig(K=2, D=3, H=4, k=1, T=5, C=3), 0)
    _, _, tr = forward(other, cp, cq)
    with pytest.raises(ConsistencyError):
        backward(model, tr, np.zeros(3))
    with pytest.raises(ConfigError):
        ModelConfig(K=2, D=3, H=4, k=2, T=5, C=3, L=3)
