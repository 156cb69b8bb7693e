"""Loss, gradient clipping, Adadelta and the epoch loop."""
from __future__ import annotations

import logging
import math
from collections.abc import Callable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dropout import dropout_apply
from .errors import ConfigError, DimensionError, NumericError
from .model import HanModel, backward, forward
from .numerics import make_rng

log = logging.getLogger(__name__)

SHUFFLE_STREAM = 4
DROPOUT_STREAM = 3

__all__ = [
    "TrainConfig", "AdadeltaState", "EpochMetrics",
    "nll_loss", "nll_from_logits", "dropout_apply", "global_norm", "clip_global_norm",
    "adadelta_step", "sample_loss_and_grads", "train_epochs", "evaluate",
]


@dataclass
class TrainConfig:
    rho: float = 0.95
    epsilon: float = 1e-6
    dropout_rate: float = 0.5
    clip_norm: float | None = 5.0
    batch_size: int = 16
    epochs: int = 50
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ConfigError(f"train.rho must lie in (0, 1), got {self.rho}")
        if self.epsilon <= 0:
            raise ConfigError(f"train.epsilon must be positive, got {self.epsilon}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"train.dropout must lie in [0, 1), got {self.dropout_rate}")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ConfigError(f"train.clip_norm must be positive, got {self.clip_norm}")
        if self.batch_size < 1 or self.epochs < 0 or self.threads < 1:
            raise ConfigError("batch_size and threads must be >= 1, epochs >= 0")


def nll_loss(class_probs: np.ndarray, label: int) -> float:
    C = class_probs.shape[0]
    if not 0 <= label < C:
        raise ConfigError(f"label {label} outside [0, {C})")
    return -math.log(class_probs[label])


def nll_from_logits(logits: np.ndarray, label: int) -> tuple[float, np.ndarray]:
    """Loss ``-log softmax(logits)[label]`` and its gradient ``p - onehot``."""
    C = logits.shape[0]
    if not 0 <= label < C:
        raise ConfigError(f"label {label} outside [0, {C})")
    m = logits.max()
    e = np.exp(logits - m)
    s = e.sum()
    loss = math.log(s) + m - logits[label]
    grad = e / s
    grad[label] -= 1.0
    return loss, grad


def global_norm(grads: Mapping[str, np.ndarray]) -> float:
    total = 0.0
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient in {name}")
        total += float(np.dot(g.ravel(), g.ravel()))
    return math.sqrt(total)


def clip_global_norm(grads: Mapping[str, np.ndarray], ceiling: float) -> Mapping[str, np.ndarray]:
    """Scale every tensor in place so the joint L2 norm is at most ``ceiling``."""
    if ceiling <= 0:
        raise ConfigError(f"clip ceiling must be positive, got {ceiling}")
    norm = global_norm(grads)
    if norm > ceiling:
        scale = ceiling / norm
        for g in grads.values():
            g *= scale
    return grads


@dataclass
class AdadeltaState:
    sq_grad: dict[str, np.ndarray]
    sq_update: dict[str, np.ndarray]

    @classmethod
    def zeros_like(cls, params: Mapping[str, np.ndarray]) -> "AdadeltaState":
        return cls(
            {n: np.zeros_like(p) for n, p in params.items()},
            {n: np.zeros_like(p) for n, p in params.items()},
        )


def adadelta_step(
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    state: AdadeltaState,
    rho: float = 0.95,
    epsilon: float = 1e-6,
) -> None:
    """One Adadelta update, in place on ``params`` and ``state``."""
    for name, p in params.items():
        g = grads[name]
        Eg, Ex = state.sq_grad[name], state.sq_update[name]
        if g.shape != p.shape or Eg.shape != p.shape:
            raise DimensionError(f"{name}: parameter {p.shape}, gradient {g.shape}, state {Eg.shape}")
        Eg *= rho
        Eg += (1.0 - rho) * g * g
        delta = -np.sqrt(Ex + epsilon) / np.sqrt(Eg + epsilon) * g
        Ex *= rho
        Ex += (1.0 - rho) * delta * delta
        p += delta


@dataclass
class EpochMetrics:
    epoch: int
    mean_loss: float
    train_accuracy: float
    eval_accuracy: float | None = None


def sample_loss_and_grads(model, sample, mode="eval", rng=None, dropout_rate=0.0):
    """``(loss, correct, grads)`` for one sample."""
    probs, _, trace = forward(model, sample.cubes_p, sample.cubes_q, mode=mode, rng=rng,
                              dropout_rate=dropout_rate)
    loss, dlogits = nll_from_logits(trace.logits, sample.label)
    grads = backward(model, trace, dlogits)
    return loss, int(np.argmax(probs)) == sample.label, grads


def _check_dataset(model: HanModel, dataset: Sequence) -> None:
    if len(dataset) == 0:
        raise ConfigError("empty dataset")
    C = model.config.C
    for s in dataset:
        if not 0 <= s.label < C:
            raise ConfigError(f"sample {s.sample_id}: label {s.label} outside [0, {C})")


def evaluate(model: HanModel, dataset: Sequence) -> tuple[float, np.ndarray, np.ndarray]:
    """Overall accuracy plus per-class correct and total counts (eval mode)."""
    _check_dataset(model, dataset)
    C = model.config.C
    correct = np.zeros(C, dtype=np.int64)
    total = np.zeros(C, dtype=np.int64)
    for s in dataset:
        probs, _, _ = forward(model, s.cubes_p, s.cubes_q, mode="eval")
        total[s.label] += 1
        correct[s.label] += int(np.argmax(probs)) == s.label
    return float(correct.sum() / total.sum()), correct, total


def train_epochs(
    model: HanModel,
    dataset: Sequence,
    config: TrainConfig,
    eval_set: Sequence | None = None,
    callback: Callable[[EpochMetrics], bool | None] | None = None,
) -> list[EpochMetrics]:
    """Mini-batch training with mean-per-batch NLL, clipping and Adadelta.

    Per-sample gradients are summed in a fixed order, so results do not
    depend on ``config.threads``. ``callback`` may return True to stop early.
    """
    _check_dataset(model, dataset)
    if eval_set is not None:
        _check_dataset(model, eval_set)
    params = model.parameters()
    state = AdadeltaState.zeros_like(params)
    shuffle_rng = make_rng(config.seed, SHUFFLE_STREAM)
    pool = ThreadPoolExecutor(config.threads) if config.threads > 1 else None
    history = []
    visit = 0
    batch_index = 0
    try:
        for epoch in range(1, config.epochs + 1):
            order = shuffle_rng.permutation(len(dataset))
            losses, hits = [], 0
            for start in range(0, len(order), config.batch_size):
                batch = [dataset[i] for i in order[start : start + config.batch_size]]
                keys = range(visit, visit + len(batch))
                visit += len(batch)

                def run(item):
                    sample, key = item
                    rng = make_rng(config.seed ^ key, DROPOUT_STREAM)
                    return sample_loss_and_grads(model, sample, "train", rng, config.dropout_rate)

                items = list(zip(batch, keys))
                try:
                    results = list(pool.map(run, items)) if pool else [run(it) for it in items]
                except NumericError as exc:
                    raise NumericError(f"batch {batch_index} (epoch {epoch}): {exc}") from exc
                total = params_zero(model)
                for loss, ok, g in results:
                    if not math.isfinite(loss):
                        raise NumericError(f"non-finite loss in batch {batch_index} (epoch {epoch})")
                    losses.append(loss)
                    hits += ok
                    for name, arr in g.parameters().items():
                        total[name] += arr
                for arr in total.values():
                    arr /= len(batch)
                try:
                    if config.clip_norm is not None:
                        clip_global_norm(total, config.clip_norm)
                    else:
                        global_norm(total)
                except NumericError as exc:
                    raise NumericError(f"batch {batch_index} (epoch {epoch}): {exc}") from exc
                adadelta_step(params, total, state, config.rho, config.epsilon)
                batch_index += 1
            m = EpochMetrics(epoch, float(np.mean(losses)), hits / len(dataset))
            if eval_set is not None:
                m.eval_accuracy = evaluate(model, eval_set)[0]
            log.info("epoch %d loss %.6f train_acc %.4f eval_acc %s",
                     m.epoch, m.mean_loss, m.train_accuracy, m.eval_accuracy)
            history.append(m)
            if callback is not None and callback(m):
                break
    finally:
        if pool:
            pool.shutdown()
    return history


def params_zero(model: HanModel) -> dict[str, np.ndarray]:
    return {n: np.zeros_like(p) for n, p in model.parameters().items()}
