import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hanet.data import SyntheticSpec, generate_synthetic
from hanet.errors import ConfigError, DimensionError, NumericError
from hanet.model import HanModel, ModelConfig, forward
from hanet.numerics import finite_diff_gradient, make_rng, stable_softmax
from hanet.training import (
    SHUFFLE_STREAM,
    AdadeltaState,
    TrainConfig,
    adadelta_step,
    clip_global_norm,
    dropout_apply,
    evaluate,
    global_norm,
    nll_from_logits,
    nll_loss,
    train_epochs,
)
from oracles import torch_adadelta_trainer


def test_nll_examples():
    assert math.isclose(nll_loss(np.full(4, 0.25), 2), math.log(4), rel_tol=0, abs_tol=1e-12)
    logits = np.array([0.0, 50.0, 0.0])
    assert nll_from_logits(logits, 1)[0] <= 1e-9
    assert nll_loss(stable_softmax(logits), 1) <= 1e-9
    with pytest.raises(ConfigError):
        nll_loss(np.full(3, 1 / 3), 3)


def test_nll_logit_gradient_matches_fd():
    z = make_rng(0).standard_normal(5)
    _, g = nll_from_logits(z, 3)
    num = finite_diff_gradient(lambda v: nll_from_logits(v, 3)[0], z.copy())
    np.testing.assert_allclose(g, num, atol=1e-6, rtol=0)
    np.testing.assert_allclose(g, stable_softmax(z) - np.eye(5)[3], atol=1e-15)


def test_dropout_identity_cases():
    v = make_rng(1).standard_normal(10)
    out, mask = dropout_apply(v, 0.0, "train", make_rng(0))
    assert out is v and np.all(mask == 1)
    out, mask = dropout_apply(v, 0.7, "eval")
    assert out is v and np.all(mask == 1)
    with pytest.raises(ConfigError):
        dropout_apply(v, 1.0, "train", make_rng(0))


def test_dropout_unbiased_monte_carlo():
    rng = make_rng(5)
    v = np.ones(10)
    total = np.zeros(10)
    n = 100_000  # 10 coordinates x 1e5 draws = 1e6 samples
    for _ in range(n // 1000):
        draws = (rng.random((1000, 10)) >= 0.5) / 0.5
        total += (v * draws).sum(axis=0)
    assert np.max(np.abs(total / n - 1.0)) < 0.01
    out, mask = dropout_apply(np.ones(1_000_000), 0.5, "train", make_rng(6))
    assert abs(out.mean() - 1.0) < 0.01
    assert set(np.unique(mask)) <= {0.0, 2.0}


def test_clip_examples():
    g = {"a": np.array([2.0, 0.0])}
    clip_global_norm(g, 5.0)
    np.testing.assert_array_equal(g["a"], [2.0, 0.0])
    g = {"a": np.array([6.0, 0.0]), "b": np.array([[8.0]])}
    clip_global_norm(g, 5.0)
    np.testing.assert_allclose(g["a"], [3.0, 0.0], rtol=0, atol=1e-15)
    np.testing.assert_allclose(g["b"], [[4.0]], rtol=0, atol=1e-15)
    assert abs(global_norm(g) - 5.0) <= 1e-12
    z = {"a": np.zeros(3)}
    clip_global_norm(z, 1.0)
    assert not z["a"].any()
    with pytest.raises(NumericError, match="bad"):
        clip_global_norm({"bad": np.array([np.inf])}, 1.0)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32), st.floats(1e-3, 1e3), st.floats(1e-3, 10))
def test_clip_never_increases_norm(seed, scale, ceiling):
    rng = make_rng(seed)
    g = {"x": scale * rng.standard_normal(7), "y": scale * rng.standard_normal((2, 3))}
    before = global_norm(g)
    direction = np.concatenate([g["x"], g["y"].ravel()]) / before
    clip_global_norm(g, ceiling)
    after = global_norm(g)
    assert after <= before + 1e-12
    assert after <= ceiling + 1e-12
    np.testing.assert_allclose(np.concatenate([g["x"], g["y"].ravel()]) / after, direction, atol=1e-12)


def test_adadelta_first_step_value():
    p = {"w": np.array([0.0])}
    st_ = AdadeltaState.zeros_like(p)
    adadelta_step(p, {"w": np.array([1.0])}, st_, 0.95, 1e-6)
    assert math.isclose(st_.sq_grad["w"][0], 0.05, abs_tol=1e-15)
    expected = -math.sqrt(1e-6) / math.sqrt(0.05 + 1e-6)
    assert abs(p["w"][0] - expected) <= 1e-15
    assert abs(p["w"][0] - (-0.0044721)) <= 1e-6


def test_adadelta_zero_gradient_decays():
    p = {"w": np.array([1.0, -2.0])}
    st_ = AdadeltaState({"w": np.array([0.4, 0.2])}, {"w": np.array([0.1, 0.3])})
    adadelta_step(p, {"w": np.zeros(2)}, st_, 0.9, 1e-6)
    np.testing.assert_array_equal(p["w"], [1.0, -2.0])
    np.testing.assert_allclose(st_.sq_grad["w"], [0.36, 0.18])
    np.testing.assert_allclose(st_.sq_update["w"], [0.09, 0.27])


def test_adadelta_sign_and_accumulators():
    rng = make_rng(2)
    p = {"w": rng.standard_normal(20)}
    st_ = AdadeltaState.zeros_like(p)
    for _ in range(10_000):
        g = rng.standard_normal(20) * rng.choice([0.0, 1e-3, 1.0, 1e3])
        before = p["w"].copy()
        adadelta_step(p, {"w": g}, st_)
        delta = p["w"] - before
        nz = g != 0
        assert np.all(np.sign(delta[nz]) == -np.sign(g[nz]))
        assert np.all(st_.sq_grad["w"] >= 0) and np.all(st_.sq_update["w"] >= 0)
    assert np.all(np.isfinite(st_.sq_grad["w"])) and np.all(np.isfinite(st_.sq_update["w"]))


def test_adadelta_shape_error():
    p = {"w": np.zeros(3)}
    with pytest.raises(DimensionError):
        adadelta_step(p, {"w": np.zeros(2)}, AdadeltaState.zeros_like(p))


def test_train_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(rho=1.0)
    with pytest.raises(ConfigError):
        TrainConfig(dropout_rate=1.0)
    with pytest.raises(ConfigError):
        TrainConfig(clip_norm=0.0)


def _tiny_data(n=2, seed=0):
    spec = SyntheticSpec(K=2, D=4, T=6, C=3, n_samples=n, sub_action_length=3, noise_sigma=0.1, seed=seed)
    return generate_synthetic(spec).samples


TINY = ModelConfig(K=2, D=4, H=5, k=2, T=6, C=3)


def test_training_deterministic_and_thread_independent():
    data = _tiny_data(3)
    runs = []
    for threads in (1, 1, 3):
        model = HanModel.init(TINY, 0)
        hist = train_epochs(model, data, TrainConfig(epochs=4, batch_size=4, threads=threads))
        runs.append(([h.mean_loss for h in hist], model.parameters()))
    for losses, params in runs[1:]:
        assert losses == runs[0][0]
        for k in params:
            assert params[k].tobytes() == runs[0][1][k].tobytes()


def test_eval_mode_ignores_seed():
    data = _tiny_data(1)
    model = HanModel.init(TINY, 0)
    a = forward(model, data[0].cubes_p, data[0].cubes_q, "eval", make_rng(1), 0.5)[0]
    b = forward(model, data[0].cubes_p, data[0].cubes_q, "eval", make_rng(2), 0.5)[0]
    assert a.tobytes() == b.tobytes()


def test_matches_torch_trainer_k1():
    cfg = ModelConfig(K=2, D=4, H=5, k=1, T=6, C=3)
    data = _tiny_data(2, seed=3)
    model = HanModel.init(cfg, 1)
    ref_model = model.copy()
    tc = TrainConfig(epochs=15, batch_size=len(data), dropout_rate=0.0, clip_norm=1e12, seed=4)
    hist = train_epochs(model, data, tc)
    order_rng = make_rng(tc.seed, SHUFFLE_STREAM)
    ref = torch_adadelta_trainer(ref_model, data, tc.epochs, tc.rho, tc.epsilon,
                                 lambda: order_rng.permutation(len(data)))
    ours = [h.mean_loss for h in hist]
    np.testing.assert_allclose(ours, ref, rtol=0, atol=1e-8)
    assert ours[-1] < ours[0]


def test_nan_input_aborts_with_batch_index():
    data = _tiny_data(2)
    data[3].cubes_p[2, 1, 0] = np.nan
    with pytest.raises(NumericError, match=r"batch \d+"):
        train_epochs(HanModel.init(TINY, 0), data, TrainConfig(epochs=1, batch_size=2))


def test_dataset_errors():
    with pytest.raises(ConfigError):
        train_epochs(HanModel.init(TINY, 0), [], TrainConfig(epochs=1))
    data = _tiny_data(1)
    data[0].label = 7
    with pytest.raises(ConfigError):
        train_epochs(HanModel.init(TINY, 0), data, TrainConfig(epochs=1))


def test_callback_stops_and_evaluate_counts():
    data = _tiny_data(2)
    hist = train_epochs(HanModel.init(TINY, 0), data, TrainConfig(epochs=10), data, lambda m: m.epoch == 3)
    assert len(hist) == 3 and hist[-1].eval_accuracy is not None
    acc, correct, total = evaluate(HanModel.init(TINY, 0), data)
    assert total.tolist() == [2, 2, 2] and acc == correct.sum() / 6
