"""Binary checkpoint format.

Layout (little-endian)::

    b"HAN1"              magic
    u32                  format version (1)
    u32 x 7              K, D, H, L, k, T, C
    f64 ...              tensors, in this order:
        for lstm in p1, p2, q1, q2:
            W_ix W_fx W_ox W_gx  (H x D_in each)
            W_ih W_fh W_oh W_gh  (H x H each)
            b_i b_f b_o b_g      (H each)
        W_attn (K*K x 2H), W_s (C x 4H), b_s (C)

Matrices are row-major. The attention on/off switch is a runtime setting and
is not stored.
"""
from __future__ import annotations

import os
import struct

import numpy as np

from .errors import (
    BadMagicError,
    ConfigMismatchError,
    ShapeInconsistencyError,
    TruncatedFileError,
    UnsupportedVersionError,
)
from .model import BLOCK_NAMES, HanModel, ModelConfig

MAGIC = b"HAN1"
VERSION = 1
_HEADER = struct.Struct("<4sI7I")
_CONFIG_KEYS = ("K", "D", "H", "L", "k", "T", "C")


def _to_bytes(model: HanModel) -> bytes:
    cfg = model.config
    header = _HEADER.pack(MAGIC, VERSION, *(getattr(cfg, k) for k in _CONFIG_KEYS))
    blocks = model.blocks()
    body = b"".join(np.ascontiguousarray(blocks[n], dtype="<f8").tobytes() for n in BLOCK_NAMES)
    return header + body


def save_checkpoint(model: HanModel, path) -> None:
    data = _to_bytes(model)
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def load_checkpoint(path, expected: ModelConfig | None = None) -> HanModel:
    """Read a checkpoint; with ``expected``, shape fields must agree with it."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagicError(f"{path}: not a checkpoint (magic {data[:4]!r}, expected {MAGIC!r})")
    if len(data) < _HEADER.size:
        raise TruncatedFileError(f"{path}: header truncated ({len(data)} bytes)")
    _, version, *vals = _HEADER.unpack_from(data)
    if version != VERSION:
        raise UnsupportedVersionError(f"{path}: checkpoint version {version}, supported {VERSION}")
    hdr = dict(zip(_CONFIG_KEYS, vals))
    if expected is not None:
        for key in _CONFIG_KEYS:
            want = getattr(expected, key)
            if hdr[key] != want:
                raise ConfigMismatchError(
                    f"{path}: checkpoint has {key}={hdr[key]} but the run expects {key}={want}"
                )
    try:
        cfg = ModelConfig(**hdr, attention=expected.attention if expected else True)
    except ValueError as exc:
        raise ShapeInconsistencyError(f"{path}: invalid header values {hdr}: {exc}") from exc
    model = HanModel.zeros(cfg)
    blocks = model.blocks()
    need = _HEADER.size + 8 * sum(blocks[n].size for n in BLOCK_NAMES)
    if len(data) < need:
        raise TruncatedFileError(f"{path}: {len(data)} bytes, header implies {need}")
    if len(data) > need:
        raise ShapeInconsistencyError(
            f"{path}: {len(data) - need} trailing bytes beyond the tensors implied by {hdr}"
        )
    off = _HEADER.size
    for n in BLOCK_NAMES:
        view = blocks[n]
        count = view.size
        view[...] = np.frombuffer(data, dtype="<f8", count=count, offset=off).reshape(view.shape)
        off += 8 * count
    return model
