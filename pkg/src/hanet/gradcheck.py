"""Whole-model gradient check against central finite differences."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import BLOCK_NAMES, HanModel, ModelConfig, backward, forward
from .numerics import finite_diff_gradient, make_rng, relative_error
from .training import nll_from_logits

TINY = ModelConfig(K=2, D=4, H=5, k=2, T=6, C=3)
GRADCHECK_STREAM = 7


@dataclass
class BlockResult:
    name: str
    max_rel_error: float
    passed: bool


def tiny_problem(config: ModelConfig = TINY, seed: int = 0, n_samples: int = 2):
    """Random model and inputs: ``(model, [(cubes_p, cubes_q, label), ...])``."""
    model = HanModel.init(config, seed)
    rng = make_rng(seed, GRADCHECK_STREAM)
    shape = (config.T, config.regions, config.D)
    batch = [
        (rng.standard_normal(shape), rng.standard_normal(shape), int(rng.integers(config.C)))
        for _ in range(n_samples)
    ]
    return model, batch


def batch_loss(model: HanModel, batch) -> float:
    total = 0.0
    for cp, cq, y in batch:
        _, _, tr = forward(model, cp, cq, mode="eval")
        total += nll_from_logits(tr.logits, y)[0]
    return total


def analytic_grads(model: HanModel, batch) -> HanModel:
    grads = model.zeros_like()
    for cp, cq, y in batch:
        _, _, tr = forward(model, cp, cq, mode="eval")
        backward(model, tr, nll_from_logits(tr.logits, y)[1], grads)
    return grads


def check_gradients(
    model: HanModel,
    batch,
    tol: float = 1e-4,
    h: float = 1e-4,
    corrupt: str | None = None,
) -> list[BlockResult]:
    """Compare analytic and numerical gradients block by block.

    The default step is 1e-4: at 1e-5 float64 roundoff (~5e-11 absolute)
    swamps layer-2 entries of magnitude 1e-9..1e-7.

    ``corrupt`` names a block whose analytic gradient is perturbed first; it
    exists so callers can confirm that a broken gradient is reported.
    """
    grads = analytic_grads(model, batch).blocks()
    if corrupt is not None:
        if corrupt not in grads:
            raise KeyError(f"unknown parameter block {corrupt!r}")
        grads[corrupt].flat[0] += 1.0
    params = model.blocks()
    results = []
    for name in BLOCK_NAMES:
        num = finite_diff_gradient(lambda _: batch_loss(model, batch), params[name], h)
        err = float(relative_error(grads[name], num).max())
        results.append(BlockResult(name, err, err <= tol))
    return results
