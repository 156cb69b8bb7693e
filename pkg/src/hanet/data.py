"""Feature-sequence files, dataset manifests and the synthetic generator.

HFC1 layout (little-endian)::

    b"HFC1"  magic
    u32      version (1)
    u32      T, K, D
    u32      stream count (always 2: appearance, motion)
    u32      dtype tag (1 = float64)
    f64 ...  payload, stream-major [stream][t][region][dim]

A stream sequence is held in memory as a (T, K*K, D) array.
"""
from __future__ import annotations

import csv
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    BadMagicError,
    ConfigError,
    DimensionError,
    EmptySequenceError,
    HeaderFieldError,
    PayloadLengthError,
    TruncatedFileError,
    UnsupportedVersionError,
)
from .numerics import make_rng

MAGIC = b"HFC1"
VERSION = 1
N_STREAMS = 2
DTYPE_FLOAT64 = 1
HEADER = struct.Struct("<4s6I")

STRUCTURE_STREAM = 5
SAMPLE_STREAM = 6
POLICIES = ("fixed", "drifting")


# -- HFC1 -------------------------------------------------------------------

def encode_sequence(cubes_p: np.ndarray, cubes_q: np.ndarray) -> bytes:
    cubes_p = np.asarray(cubes_p, dtype=np.float64)
    cubes_q = np.asarray(cubes_q, dtype=np.float64)
    if cubes_p.shape != cubes_q.shape or cubes_p.ndim != 3:
        raise DimensionError(f"stream shapes differ or are not 3-D: {cubes_p.shape} vs {cubes_q.shape}")
    T, R, D = cubes_p.shape
    K = int(round(R ** 0.5))
    if K * K != R:
        raise DimensionError(f"region count {R} is not a perfect square")
    if T == 0:
        raise EmptySequenceError("cannot write an empty sequence")
    header = HEADER.pack(MAGIC, VERSION, T, K, D, N_STREAMS, DTYPE_FLOAT64)
    return header + np.stack([cubes_p, cubes_q]).astype("<f8").tobytes()


def decode_sequence(data: bytes, name: str = "<bytes>") -> tuple[np.ndarray, np.ndarray]:
    if len(data) < 4:
        raise TruncatedFileError(f"{name}: {len(data)} bytes, shorter than the magic")
    if data[:4] != MAGIC:
        raise BadMagicError(f"{name}: bad magic {data[:4]!r}, expected {MAGIC!r}")
    if len(data) < HEADER.size:
        raise TruncatedFileError(f"{name}: header truncated at {len(data)} of {HEADER.size} bytes")
    _, version, T, K, D, streams, dtype = HEADER.unpack_from(data)
    if version != VERSION:
        raise UnsupportedVersionError(f"{name}: version {version}, supported {VERSION}")
    if streams != N_STREAMS:
        raise HeaderFieldError(f"{name}: stream count {streams}, expected {N_STREAMS}")
    if dtype != DTYPE_FLOAT64:
        raise HeaderFieldError(f"{name}: dtype tag {dtype}, expected {DTYPE_FLOAT64} (float64)")
    if T == 0:
        raise EmptySequenceError(f"{name}: header declares zero frames")
    if K == 0 or D == 0:
        raise HeaderFieldError(f"{name}: zero-sized frame (K={K}, D={D})")
    need = N_STREAMS * T * K * K * D * 8
    have = len(data) - HEADER.size
    if have < need:
        raise TruncatedFileError(f"{name}: payload has {have} bytes, header implies {need}")
    if have > need:
        raise PayloadLengthError(f"{name}: payload has {have} bytes, header implies {need}")
    arr = np.frombuffer(data, dtype="<f8", offset=HEADER.size).astype(np.float64)
    arr = arr.reshape(N_STREAMS, T, K * K, D)
    return arr[0].copy(), arr[1].copy()


def write_sequence(path, cubes_p: np.ndarray, cubes_q: np.ndarray) -> None:
    Path(path).write_bytes(encode_sequence(cubes_p, cubes_q))


def read_sequence(path) -> tuple[np.ndarray, np.ndarray]:
    return decode_sequence(Path(path).read_bytes(), os.fspath(path))


# -- frame subsampling -------------------------------------------------------

def subsample_indices(T: int, n_frames: int) -> list[int]:
    """1-based frame indices at equal temporal spacing, endpoints included.

    Index j (1..n) is ``round_half_up(1 + (j-1)(T-1)/(n-1))``.
    """
    if not 1 <= n_frames <= T:
        raise ConfigError(f"n_frames must lie in [1, {T}], got {n_frames}")
    if n_frames == 1:
        return [1]
    den = n_frames - 1
    return [1 + (2 * (j * (T - 1)) + den) // (2 * den) for j in range(n_frames)]


def subsample_frames(sequence: np.ndarray, n_frames: int) -> np.ndarray:
    idx = subsample_indices(sequence.shape[0], n_frames)
    return sequence[np.asarray(idx) - 1]


# -- manifests ---------------------------------------------------------------

@dataclass
class Sample:
    sample_id: str
    cubes_p: np.ndarray
    cubes_q: np.ndarray
    label: int
    truth: np.ndarray | None = None  # per-frame informative region, synthetic data only


def write_label_map(path, labels: list[str]) -> None:
    with open(path, "w") as fh:
        for i, name in enumerate(labels):
            fh.write(f"{name}\t{i}\n")


def read_label_map(path) -> dict[str, int]:
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ConfigError(f"{path}:{lineno}: expected 'label<TAB>index'")
            try:
                out[parts[0]] = int(parts[1])
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: class index {parts[1]!r} is not an integer") from None
    if sorted(out.values()) != list(range(len(out))):
        raise ConfigError(f"{path}: class indices must be dense in [0, {len(out)})")
    return out


def write_manifest(path, records: list[tuple[str, str, str]]) -> None:
    with open(path, "w") as fh:
        for sample_id, feature_file, label in records:
            fh.write(f"{sample_id}\t{feature_file}\t{label}\n")


def read_manifest(path) -> list[tuple[str, Path, str]]:
    """Records ``(sample_id, feature_path, label)``; relative paths resolve against the manifest."""
    base = Path(path).parent
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ConfigError(f"{path}:{lineno}: expected 'sample_id<TAB>file<TAB>label'")
            sid, fpath, label = parts
            out.append((sid, base / fpath, label))
    return out


def read_truth(path) -> dict[str, np.ndarray]:
    rows: dict[str, list[tuple[int, int]]] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rows.setdefault(row["sample_id"], []).append((int(row["t"]), int(row["true_region_index"])))
    return {sid: np.array([r for _, r in sorted(v)]) for sid, v in rows.items()}


def load_dataset(manifest, label_map, n_frames: int | None = None, truth=None) -> list[Sample]:
    """Load every sample in ``manifest``; optionally subsample each to ``n_frames``."""
    labels = read_label_map(label_map)
    truth_map = read_truth(truth) if truth else {}
    samples = []
    for sid, fpath, label in read_manifest(manifest):
        if label not in labels:
            raise ConfigError(f"{manifest}: sample {sid} has label {label!r} missing from the label map")
        if not fpath.exists():
            raise ConfigError(f"{manifest}: feature file {fpath} for sample {sid} not found")
        cp, cq = read_sequence(fpath)
        tr = truth_map.get(sid)
        if n_frames is not None and n_frames != cp.shape[0]:
            cp, cq = subsample_frames(cp, n_frames), subsample_frames(cq, n_frames)
            if tr is not None:
                tr = subsample_frames(tr, n_frames)
        samples.append(Sample(sid, cp, cq, labels[label], tr))
    return samples


# -- synthetic generator ------------------------------------------------------

@dataclass(frozen=True)
class SyntheticSpec:
    K: int
    D: int
    T: int
    C: int
    n_samples: int
    signal_region_policy: str = "fixed"
    sub_action_length: int = 4
    noise_sigma: float = 0.1
    seed: int = 0

    def validate(self) -> None:
        if self.sub_action_length < 1:
            raise ConfigError(f"sub_action_length must be >= 1, got {self.sub_action_length}")
        if self.C < 2:
            raise ConfigError(f"need at least 2 classes, got C={self.C}")
        if self.noise_sigma < 0:
            raise ConfigError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if min(self.K, self.D, self.n_samples) < 1:
            raise ConfigError("K, D and n_samples must be positive")
        if self.signal_region_policy not in POLICIES:
            raise ConfigError(f"unknown signal_region_policy {self.signal_region_policy!r}; use one of {POLICIES}")
        if self.T < 2 * self.sub_action_length:
            raise ConfigError(
                f"T={self.T} is too short for sub_action_length={self.sub_action_length}: "
                f"at least two sub-actions (T >= {2 * self.sub_action_length}) are needed "
                "for order-confusable classes"
            )


@dataclass
class SyntheticDataset:
    spec: SyntheticSpec
    samples: list[Sample]
    label_names: list[str]
    class_codes: list[tuple[int, ...]]  # ordered sub-action codes per class
    class_regions: list[int]  # starting informative region per class
    signals_p: np.ndarray  # (n_codes, D)
    signals_q: np.ndarray
    frame_codes: list[np.ndarray] = field(default_factory=list)  # per class, code at each frame

    def confusable_pairs(self) -> list[tuple[int, int]]:
        """Class pairs with equal sub-action multisets but different order."""
        out = []
        for a in range(len(self.class_codes)):
            for b in range(a + 1, len(self.class_codes)):
                ca, cb = self.class_codes[a], self.class_codes[b]
                if sorted(ca) == sorted(cb) and ca != cb:
                    out.append((a, b))
        return out


def _class_structure(spec: SyntheticSpec, rng: np.random.Generator):
    n_seg = spec.T // spec.sub_action_length
    n_perm = 1
    for m in range(2, n_seg + 1):
        n_perm *= m
        if n_perm >= spec.C:
            break
    group_size = min(spec.C, n_perm)
    R = spec.K * spec.K
    codes, regions = [], []
    group_region = []
    for c in range(spec.C):
        g, pos = divmod(c, group_size)
        if pos == 0:
            vocab = list(range(g * n_seg, (g + 1) * n_seg))
            seen: set[tuple[int, ...]] = set()
            group_region.append(int(rng.integers(R)))
        while True:
            perm = tuple(vocab[i] for i in rng.permutation(n_seg))
            if perm not in seen:
                seen.add(perm)
                break
        codes.append(perm)
        regions.append(group_region[g])
    n_codes = (max(max(c) for c in codes)) + 1
    return n_seg, codes, regions, n_codes


def generate_synthetic(spec: SyntheticSpec) -> SyntheticDataset:
    """Classes are distinct orderings of a shared set of sub-action codes.

    Each sub-action lasts ``sub_action_length`` frames (trailing frames extend
    the last one). In every frame a single region carries the code's signal
    vector in both streams; all regions carry N(0, noise_sigma^2) noise.
    Classes of one group share the informative region; under "drifting" it
    advances one grid cell (raster order) per sub-action.
    """
    spec.validate()
    rng = make_rng(spec.seed, STRUCTURE_STREAM)
    n_seg, codes, regions, n_codes = _class_structure(spec, rng)
    sig_p = rng.standard_normal((n_codes, spec.D))
    sig_q = rng.standard_normal((n_codes, spec.D))
    R = spec.K * spec.K
    T, L = spec.T, spec.sub_action_length
    seg_of_t = np.minimum(np.arange(T) // L, n_seg - 1)
    frame_codes = [np.array(codes[c])[seg_of_t] for c in range(spec.C)]
    if spec.signal_region_policy == "fixed":
        frame_regions = [np.full(T, regions[c]) for c in range(spec.C)]
    else:
        frame_regions = [(regions[c] + seg_of_t) % R for c in range(spec.C)]

    samples = []
    for idx in range(spec.n_samples * spec.C):
        c = idx % spec.C
        srng = make_rng(spec.seed ^ idx, SAMPLE_STREAM)
        cp = spec.noise_sigma * srng.standard_normal((T, R, spec.D))
        cq = spec.noise_sigma * srng.standard_normal((T, R, spec.D))
        rows = np.arange(T)
        cp[rows, frame_regions[c]] += sig_p[frame_codes[c]]
        cq[rows, frame_regions[c]] += sig_q[frame_codes[c]]
        samples.append(Sample(f"s{idx:05d}", cp, cq, c, frame_regions[c].copy()))
    return SyntheticDataset(
        spec, samples, [f"class{c}" for c in range(spec.C)], codes, regions, sig_p, sig_q, frame_codes
    )


def write_dataset(dataset: SyntheticDataset, out_dir) -> Path:
    """Write feature files, ``manifest.tsv``, ``labels.tsv`` and ``attention_truth.csv``."""
    out = Path(out_dir)
    (out / "samples").mkdir(parents=True, exist_ok=True)
    records = []
    for s in dataset.samples:
        rel = f"samples/{s.sample_id}.hfc"
        write_sequence(out / rel, s.cubes_p, s.cubes_q)
        records.append((s.sample_id, rel, dataset.label_names[s.label]))
    write_manifest(out / "manifest.tsv", records)
    write_label_map(out / "labels.tsv", dataset.label_names)
    with open(out / "attention_truth.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id", "t", "true_region_index"])
        for s in dataset.samples:
            for t, r in enumerate(s.truth, 1):
                w.writerow([s.sample_id, t, int(r)])
    return out
