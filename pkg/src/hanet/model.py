"""Two-stream hierarchical attention network.

Per frame t: attention weights from the layer-1 states at t-1, attended
inputs for both streams, one layer-1 step per stream. Layer 2 of each stream
steps only at the scheduled frames ``k, 2k, ..., T`` and reads the layer-1
hidden state directly. The video encoding concatenates the final states of
all four LSTMs and feeds a softmax classifier.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import _backend
from .attention import AttentionParams
from .dropout import dropout_apply
from .errors import ConfigError, ConsistencyError, DimensionError, EmptySequenceError
from .lstm import TENSOR_NAMES, LstmParams
from .numerics import check_finite, make_rng, stable_softmax

STREAM_LAYERS = ("p1", "p2", "q1", "q2")
INIT_STREAM = 2


@dataclass(frozen=True)
class ModelConfig:
    K: int
    D: int
    H: int
    k: int
    T: int
    C: int
    L: int = 2
    attention: bool = True

    def __post_init__(self):
        for name in ("K", "D", "H", "k", "T", "C"):
            if getattr(self, name) < 1:
                raise ConfigError(f"model.{name} must be positive, got {getattr(self, name)}")
        if self.L != 2:
            raise ConfigError(f"only two-layer hierarchies are supported, got L={self.L}")

    @property
    def regions(self) -> int:
        return self.K * self.K


def layer2_schedule(T: int, k: int) -> list[int]:
    """1-based frame indices at which layer 2 steps: multiples of k, plus T."""
    if T < 1:
        raise EmptySequenceError("sequence length must be at least 1")
    if k < 1:
        raise ConfigError(f"skip stride must be >= 1, got {k}")
    steps = list(range(k, T + 1, k))
    if not steps or steps[-1] != T:
        steps.append(T)
    return steps


@dataclass
class HanModel:
    config: ModelConfig
    p1: LstmParams
    p2: LstmParams
    q1: LstmParams
    q2: LstmParams
    attn: AttentionParams
    W_s: np.ndarray
    b_s: np.ndarray

    @classmethod
    def zeros(cls, config: ModelConfig) -> "HanModel":
        D, H = config.D, config.H
        return cls(
            config,
            LstmParams.zeros(D, H), LstmParams.zeros(H, H),
            LstmParams.zeros(D, H), LstmParams.zeros(H, H),
            AttentionParams.zeros(config.regions, H),
            np.zeros((config.C, 4 * H)),
            np.zeros(config.C),
        )

    @classmethod
    def init(cls, config: ModelConfig, seed: int = 0) -> "HanModel":
        rng = make_rng(seed, INIT_STREAM)
        D, H, C = config.D, config.H, config.C
        a = np.sqrt(6.0 / (4 * H + C))
        return cls(
            config,
            LstmParams.init(D, H, rng), LstmParams.init(H, H, rng),
            LstmParams.init(D, H, rng), LstmParams.init(H, H, rng),
            AttentionParams.init(config.regions, H, rng),
            rng.uniform(-a, a, size=(C, 4 * H)),
            np.zeros(C),
        )

    def zeros_like(self) -> "HanModel":
        return HanModel.zeros(self.config)

    def copy(self) -> "HanModel":
        return HanModel(
            self.config, self.p1.copy(), self.p2.copy(), self.q1.copy(), self.q2.copy(),
            AttentionParams(self.attn.W.copy()), self.W_s.copy(), self.b_s.copy(),
        )

    def parameters(self) -> dict[str, np.ndarray]:
        """Underlying storage arrays, in a fixed order. Mutating them mutates the model."""
        out = {}
        for name in STREAM_LAYERS:
            lstm = getattr(self, name)
            out[f"{name}.Wx"] = lstm.Wx
            out[f"{name}.Wh"] = lstm.Wh
            out[f"{name}.b"] = lstm.b
        out["attn.W"] = self.attn.W
        out["cls.W_s"] = self.W_s
        out["cls.b_s"] = self.b_s
        return out

    def blocks(self) -> dict[str, np.ndarray]:
        """Named parameter blocks: 12 per LSTM, then W_attn, W_s, b_s (views)."""
        out = {}
        for name in STREAM_LAYERS:
            for tname, view in getattr(self, name).tensors().items():
                out[f"{name}.{tname}"] = view
        out["attn.W"] = self.attn.W
        out["cls.W_s"] = self.W_s
        out["cls.b_s"] = self.b_s
        return out


BLOCK_NAMES = tuple(f"{s}.{t}" for s in STREAM_LAYERS for t in TENSOR_NAMES) + (
    "attn.W", "cls.W_s", "cls.b_s",
)


@dataclass
class VideoEncoding:
    h_f: np.ndarray


@dataclass
class ForwardTrace:
    config: ModelConfig
    cubes_p: np.ndarray
    cubes_q: np.ndarray
    schedule: list[int]
    attn: np.ndarray  # (T, K*K)
    x_p: np.ndarray  # (T, D)
    x_q: np.ndarray
    # layer 1: row t holds the state after frame t; row 0 is the zero initial state
    h_p1: np.ndarray
    c_p1: np.ndarray
    h_q1: np.ndarray
    c_q1: np.ndarray
    gates_p1: np.ndarray  # (T, 4H)
    gates_q1: np.ndarray
    # layer 2: indexed by position in the schedule, same convention
    in_p2: np.ndarray
    in_q2: np.ndarray
    mask_p2: np.ndarray | None
    mask_q2: np.ndarray | None
    h_p2: np.ndarray
    c_p2: np.ndarray
    h_q2: np.ndarray
    c_q2: np.ndarray
    gates_p2: np.ndarray
    gates_q2: np.ndarray
    h_f: np.ndarray
    mask_f: np.ndarray | None
    h_f_in: np.ndarray
    logits: np.ndarray
    probs: np.ndarray
    mode: str = "eval"


def _validate_inputs(cfg: ModelConfig, cubes_p, cubes_q):
    cubes_p = np.ascontiguousarray(cubes_p, dtype=np.float64)
    cubes_q = np.ascontiguousarray(cubes_q, dtype=np.float64)
    if cubes_p.ndim != 3 or cubes_q.ndim != 3:
        raise DimensionError(
            f"streams must be (T, K*K, D) arrays, got {cubes_p.shape} and {cubes_q.shape}"
        )
    if cubes_p.shape[0] == 0 or cubes_q.shape[0] == 0:
        raise EmptySequenceError("empty frame sequence")
    if cubes_p.shape[0] != cubes_q.shape[0]:
        raise DimensionError(
            f"stream lengths differ: appearance {cubes_p.shape[0]}, motion {cubes_q.shape[0]}"
        )
    expected = (cfg.T, cfg.regions, cfg.D)
    if cubes_p.shape != expected or cubes_q.shape != expected:
        raise DimensionError(
            f"streams {cubes_p.shape} / {cubes_q.shape} do not match config {expected}"
        )
    check_finite("appearance features", cubes_p)
    check_finite("motion features", cubes_q)
    return cubes_p, cubes_q


def forward(
    model: HanModel,
    cubes_p: np.ndarray,
    cubes_q: np.ndarray,
    mode: str = "eval",
    rng: np.random.Generator | None = None,
    dropout_rate: float = 0.0,
) -> tuple[np.ndarray, VideoEncoding, ForwardTrace]:
    """Class probabilities, video encoding and the trace needed by ``backward``.

    In train mode with ``dropout_rate > 0``, inverted dropout is applied to
    the layer-2 inputs and to the encoding before the classifier.
    """
    kern = _backend.kernels
    cfg = model.config
    cubes_p, cubes_q = _validate_inputs(cfg, cubes_p, cubes_q)
    T, R, D = cubes_p.shape
    H = cfg.H
    sched = layer2_schedule(T, cfg.k)
    n2 = len(sched)
    drop = mode == "train" and dropout_rate > 0.0
    if mode not in ("train", "eval"):
        raise ConfigError(f"mode must be 'train' or 'eval', got {mode!r}")

    h_p1 = np.zeros((T + 1, H)); c_p1 = np.zeros((T + 1, H))
    h_q1 = np.zeros((T + 1, H)); c_q1 = np.zeros((T + 1, H))
    g_p1 = np.empty((T, 4 * H)); g_q1 = np.empty((T, 4 * H))
    h_p2 = np.zeros((n2 + 1, H)); c_p2 = np.zeros((n2 + 1, H))
    h_q2 = np.zeros((n2 + 1, H)); c_q2 = np.zeros((n2 + 1, H))
    g_p2 = np.empty((n2, 4 * H)); g_q2 = np.empty((n2, 4 * H))
    in_p2 = np.empty((n2, H)); in_q2 = np.empty((n2, H))
    mask_p2 = np.empty((n2, H)) if drop else None
    mask_q2 = np.empty((n2, H)) if drop else None
    A = np.empty((T, R)); XP = np.empty((T, D)); XQ = np.empty((T, D))
    uniform = np.full(R, 1.0 / R)
    p1, p2, q1, q2 = model.p1, model.p2, model.q1, model.q2

    j = 0
    for t in range(T):
        if cfg.attention:
            l, xp, xq = kern.attention_forward(model.attn.W, h_p1[t], h_q1[t], cubes_p[t], cubes_q[t])
        else:
            l, xp, xq = uniform, uniform @ cubes_p[t], uniform @ cubes_q[t]
        A[t] = l; XP[t] = xp; XQ[t] = xq
        g_p1[t], c_p1[t + 1], h_p1[t + 1] = kern.lstm_forward(p1.Wx, p1.Wh, p1.b, XP[t], h_p1[t], c_p1[t])
        g_q1[t], c_q1[t + 1], h_q1[t + 1] = kern.lstm_forward(q1.Wx, q1.Wh, q1.b, XQ[t], h_q1[t], c_q1[t])
        if j < n2 and sched[j] == t + 1:
            if drop:
                in_p2[j], mask_p2[j] = dropout_apply(h_p1[t + 1], dropout_rate, "train", rng)
                in_q2[j], mask_q2[j] = dropout_apply(h_q1[t + 1], dropout_rate, "train", rng)
            else:
                in_p2[j] = h_p1[t + 1]
                in_q2[j] = h_q1[t + 1]
            g_p2[j], c_p2[j + 1], h_p2[j + 1] = kern.lstm_forward(p2.Wx, p2.Wh, p2.b, in_p2[j], h_p2[j], c_p2[j])
            g_q2[j], c_q2[j + 1], h_q2[j + 1] = kern.lstm_forward(q2.Wx, q2.Wh, q2.b, in_q2[j], h_q2[j], c_q2[j])
            j += 1

    h_f = np.concatenate([h_p1[T], h_p2[n2], h_q1[T], h_q2[n2]])
    if drop:
        h_f_in, mask_f = dropout_apply(h_f, dropout_rate, "train", rng)
    else:
        h_f_in, mask_f = h_f, None
    logits = model.W_s @ h_f_in + model.b_s
    check_finite("logits", logits)
    probs = stable_softmax(logits)
    trace = ForwardTrace(
        cfg, cubes_p, cubes_q, sched, A, XP, XQ,
        h_p1, c_p1, h_q1, c_q1, g_p1, g_q1,
        in_p2, in_q2, mask_p2, mask_q2, h_p2, c_p2, h_q2, c_q2, g_p2, g_q2,
        h_f, mask_f, h_f_in, logits, probs, mode,
    )
    return probs, VideoEncoding(h_f), trace


def backward(
    model: HanModel,
    trace: ForwardTrace,
    grad_logits: np.ndarray,
    grads: HanModel | None = None,
) -> HanModel:
    """Full BPTT through both recurrences (LSTM and attention-on-previous-state).

    Returns a ``HanModel``-shaped gradient set; accumulates into ``grads`` if given.
    """
    kern = _backend.kernels
    cfg = model.config
    if trace.config != cfg:
        raise ConsistencyError(f"trace built with {trace.config}, model has {cfg}")
    if trace.h_p1.shape[1] != model.p1.hidden or trace.attn.shape[1] != model.attn.regions:
        raise ConsistencyError("trace shapes do not match model parameters")
    grad_logits = np.asarray(grad_logits, dtype=np.float64)
    if grad_logits.shape != (cfg.C,):
        raise DimensionError(f"logit gradient shape {grad_logits.shape}, expected ({cfg.C},)")
    if grads is None:
        grads = model.zeros_like()
    elif grads.config != cfg:
        raise ConsistencyError("gradient accumulator belongs to a different configuration")

    H = cfg.H
    T = trace.attn.shape[0]
    sched = trace.schedule
    p1, p2, q1, q2 = model.p1, model.p2, model.q1, model.q2
    G1p, G2p, G1q, G2q = grads.p1, grads.p2, grads.q1, grads.q2

    grads.W_s += np.outer(grad_logits, trace.h_f_in)
    grads.b_s += grad_logits
    dhf = model.W_s.T @ grad_logits
    if trace.mask_f is not None:
        dhf = dhf * trace.mask_f
    dh_p1 = dhf[:H].copy(); dh_p2 = dhf[H : 2 * H].copy()
    dh_q1 = dhf[2 * H : 3 * H].copy(); dh_q2 = dhf[3 * H :].copy()
    dc_p1 = np.zeros(H); dc_q1 = np.zeros(H); dc_p2 = np.zeros(H); dc_q2 = np.zeros(H)

    tr = trace
    j = len(sched) - 1
    for t in range(T - 1, -1, -1):
        if j >= 0 and sched[j] == t + 1:
            dx, dh_p2, dc_p2 = kern.lstm_backward(
                p2.Wx, p2.Wh, tr.in_p2[j], tr.h_p2[j], tr.c_p2[j], tr.gates_p2[j], tr.c_p2[j + 1],
                dh_p2, dc_p2, G2p.Wx, G2p.Wh, G2p.b)
            dh_p1 = dh_p1 + (dx * tr.mask_p2[j] if tr.mask_p2 is not None else dx)
            dx, dh_q2, dc_q2 = kern.lstm_backward(
                q2.Wx, q2.Wh, tr.in_q2[j], tr.h_q2[j], tr.c_q2[j], tr.gates_q2[j], tr.c_q2[j + 1],
                dh_q2, dc_q2, G2q.Wx, G2q.Wh, G2q.b)
            dh_q1 = dh_q1 + (dx * tr.mask_q2[j] if tr.mask_q2 is not None else dx)
            j -= 1
        dxp, dh_p1, dc_p1 = kern.lstm_backward(
            p1.Wx, p1.Wh, tr.x_p[t], tr.h_p1[t], tr.c_p1[t], tr.gates_p1[t], tr.c_p1[t + 1],
            dh_p1, dc_p1, G1p.Wx, G1p.Wh, G1p.b)
        dxq, dh_q1, dc_q1 = kern.lstm_backward(
            q1.Wx, q1.Wh, tr.x_q[t], tr.h_q1[t], tr.c_q1[t], tr.gates_q1[t], tr.c_q1[t + 1],
            dh_q1, dc_q1, G1q.Wx, G1q.Wh, G1q.b)
        if cfg.attention and t > 0:
            dhp_a, dhq_a = kern.attention_backward(
                model.attn.W, tr.h_p1[t], tr.h_q1[t], tr.cubes_p[t], tr.cubes_q[t], tr.attn[t],
                dxp, dxq, grads.attn.W)
            dh_p1 = dh_p1 + dhp_a
            dh_q1 = dh_q1 + dhq_a
    return grads


def predict(model: HanModel, cubes_p: np.ndarray, cubes_q: np.ndarray) -> np.ndarray:
    probs, _, _ = forward(model, cubes_p, cubes_q, mode="eval")
    return probs


def with_attention(model: HanModel, enabled: bool) -> HanModel:
    """Same parameters (shared storage), attention switched on or off."""
    return replace(model, config=replace(model.config, attention=enabled))

