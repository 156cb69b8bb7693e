"""Run configuration: flat dotted keys from a text file, overridden by flags.

File syntax, one setting per line, ``#`` starts a comment::

    model.hidden = 64
    train.epochs = 100   # inline comments are fine
"""
from __future__ import annotations

from pathlib import Path
from typing import Any

from .data import SyntheticSpec
from .errors import ConfigError
from .model import ModelConfig
from .training import TrainConfig

DEFAULTS: dict[str, Any] = {
    "model.grid": 3,
    "model.feature_dim": 8,
    "model.hidden": 16,
    "model.layers": 2,
    "model.skip": 4,
    "model.frames": 16,
    "model.classes": 4,
    "model.attention": True,
    "model.seed": 0,
    "train.rho": 0.95,
    "train.epsilon": 1e-6,
    "train.dropout": 0.5,
    "train.clip_norm": 5.0,
    "train.batch_size": 16,
    "train.epochs": 50,
    "train.seed": 0,
    "train.threads": 1,
    "synth.n_samples": 50,
    "synth.policy": "fixed",
    "synth.sub_action_length": 4,
    "synth.noise_sigma": 0.1,
    "synth.seed": 0,
    "data.dir": "data",
    "data.manifest": "",
    "data.label_map": "",
    "data.truth": "",
    "data.eval_manifest": "",
    "out.checkpoint": "run/model.han",
    "out.metrics": "run/metrics.csv",
    "gradcheck.seed": 0,
    "gradcheck.tol": 1e-4,
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def coerce(key: str, raw: str) -> Any:
    if key not in DEFAULTS:
        raise ConfigError(f"unknown config key {key!r}")
    kind = type(DEFAULTS[key])
    raw = raw.strip()
    try:
        if kind is bool:
            if raw.lower() in _TRUE:
                return True
            if raw.lower() in _FALSE:
                return False
            raise ValueError(raw)
        return kind(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind.__name__}") from None


def parse_config_text(text: str, source: str = "<config>") -> dict[str, Any]:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            out[key] = coerce(key, value)
        except ConfigError as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from None
    return out


class RunConfig(dict):
    """Merged settings; lookups by dotted key."""

    @classmethod
    def load(cls, path=None, overrides: dict[str, str] | None = None) -> "RunConfig":
        cfg = cls(DEFAULTS)
        if path is not None:
            p = Path(path)
            if not p.is_file():
                raise ConfigError(f"config file {p} not found")
            cfg.update(parse_config_text(p.read_text(), str(p)))
        for key, raw in (overrides or {}).items():
            cfg[key] = coerce(key, raw)
        return cfg

    def path(self, key: str, default_name: str | None = None) -> Path | None:
        value = self[key]
        if value:
            return Path(value)
        if default_name is not None:
            return Path(self["data.dir"]) / default_name
        return None

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            K=self["model.grid"], D=self["model.feature_dim"], H=self["model.hidden"],
            k=self["model.skip"], T=self["model.frames"], C=self["model.classes"],
            L=self["model.layers"], attention=self["model.attention"],
        )

    def train_config(self) -> TrainConfig:
        clip = self["train.clip_norm"]
        return TrainConfig(
            rho=self["train.rho"], epsilon=self["train.epsilon"],
            dropout_rate=self["train.dropout"], clip_norm=clip if clip > 0 else None,
            batch_size=self["train.batch_size"], epochs=self["train.epochs"],
            seed=self["train.seed"], threads=self["train.threads"],
        )

    def synthetic_spec(self) -> SyntheticSpec:
        return SyntheticSpec(
            K=self["model.grid"], D=self["model.feature_dim"], T=self["model.frames"],
            C=self["model.classes"], n_samples=self["synth.n_samples"],
            signal_region_policy=self["synth.policy"],
            sub_action_length=self["synth.sub_action_length"],
            noise_sigma=self["synth.noise_sigma"], seed=self["synth.seed"],
        )
