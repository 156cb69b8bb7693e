import numpy as np

from .errors import ConfigError


def dropout_apply(v: np.ndarray, rate: float, mode: str, rng: np.random.Generator | None = None):
    """Inverted dropout. Returns ``(output, mask)``; the mask carries the 1/(1-rate) scale."""
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must lie in [0, 1), got {rate}")
    if mode not in ("train", "eval"):
        raise ConfigError(f"mode must be 'train' or 'eval', got {mode!r}")
    if mode == "eval" or rate == 0.0:
        return v, np.ones_like(v)
    if rng is None:
        raise ConfigError("train-mode dropout needs an rng")
    mask = (rng.random(v.shape) >= rate) / (1.0 - rate)
    return v * mask, mask
