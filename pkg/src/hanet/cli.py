"""Command-line entry point.

Exit codes: 0 success, 1 check failure, 2 configuration or input error,
3 numeric failure at runtime.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .config import DEFAULTS, RunConfig
from .data import generate_synthetic, load_dataset, write_dataset
from .errors import ConfigError, FormatError, HanError, NumericError
from .gradcheck import TINY, check_gradients, tiny_problem
from .model import BLOCK_NAMES, HanModel, forward
from .training import evaluate, train_epochs

log = logging.getLogger("hanet")

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _dataset(cfg: RunConfig, manifest: Path):
    if not manifest.is_file():
        raise ConfigError(f"manifest {manifest} not found")
    samples = load_dataset(manifest, cfg.path("data.label_map", "labels.tsv"),
                           n_frames=cfg["model.frames"])
    if not samples:
        raise ConfigError(f"manifest {manifest} lists no samples")
    return samples


def _load_model(cfg: RunConfig, checkpoint) -> HanModel:
    path = Path(checkpoint) if checkpoint else cfg.path("out.checkpoint")
    if not path.is_file():
        raise ConfigError(f"checkpoint {path} not found")
    return load_checkpoint(path, expected=cfg.model_config())


def cmd_gen_data(cfg: RunConfig, args) -> int:
    spec = cfg.synthetic_spec()
    ds = generate_synthetic(spec)
    out = write_dataset(ds, cfg["data.dir"])
    print(f"wrote {len(ds.samples)} samples to {out}")
    return EXIT_OK


def cmd_train(cfg: RunConfig, args) -> int:
    train_set = _dataset(cfg, cfg.path("data.manifest", "manifest.tsv"))
    eval_path = cfg.path("data.eval_manifest")
    eval_set = _dataset(cfg, eval_path) if eval_path else None
    model = HanModel.init(cfg.model_config(), cfg["model.seed"])
    metrics_path = cfg.path("out.metrics")
    ckpt_path = cfg.path("out.checkpoint")
    metrics_path.parent.mkdir(parents=True, exist_ok=True)
    ckpt_path.parent.mkdir(parents=True, exist_ok=True)
    with open(metrics_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "mean_loss", "train_accuracy", "eval_accuracy"])

        def emit(m):
            w.writerow([m.epoch, repr(m.mean_loss), repr(m.train_accuracy),
                        "" if m.eval_accuracy is None else repr(m.eval_accuracy)])
            fh.flush()

        train_epochs(model, train_set, cfg.train_config(), eval_set, callback=emit)
    save_checkpoint(model, ckpt_path)
    print(f"checkpoint {ckpt_path}, metrics {metrics_path}")
    return EXIT_OK


def cmd_eval(cfg: RunConfig, args) -> int:
    model = _load_model(cfg, args.checkpoint)
    manifest = Path(args.manifest) if args.manifest else (
        cfg.path("data.eval_manifest") or cfg.path("data.manifest", "manifest.tsv"))
    samples = _dataset(cfg, manifest)
    acc, correct, total = evaluate(model, samples)
    labels = {s.label: None for s in samples}
    names = _label_names(cfg)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["class_index", "label", "count", "correct", "accuracy"])
    per_class = []
    for c in range(model.config.C):
        if total[c] == 0:
            continue
        a = correct[c] / total[c]
        per_class.append(a)
        w.writerow([c, names.get(c, ""), int(total[c]), int(correct[c]), repr(float(a))])
    w.writerow(["overall", "", int(total.sum()), int(correct.sum()), repr(acc)])
    w.writerow(["mean_per_class", "", len(labels), "", repr(float(np.mean(per_class)))])
    return EXIT_OK


def _label_names(cfg: RunConfig) -> dict[int, str]:
    from .data import read_label_map

    return {i: n for n, i in read_label_map(cfg.path("data.label_map", "labels.tsv")).items()}


def cmd_attention_dump(cfg: RunConfig, args) -> int:
    model = _load_model(cfg, args.checkpoint)
    manifest = Path(args.manifest) if args.manifest else cfg.path("data.manifest", "manifest.tsv")
    samples = [s for s in _dataset(cfg, manifest) if s.sample_id == args.sample]
    if not samples:
        raise ConfigError(f"sample {args.sample!r} not in {manifest}")
    s = samples[0]
    _, _, trace = forward(model, s.cubes_p, s.cubes_q, mode="eval")
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["sample_id", "t", "region_index", "weight"])
    for t, weights in enumerate(trace.attn, 1):
        for r, v in enumerate(weights):
            w.writerow([s.sample_id, t, r, repr(float(v))])
    return EXIT_OK


def cmd_gradcheck(cfg: RunConfig, args) -> int:
    start = time.perf_counter()
    model, batch = tiny_problem(TINY, cfg["gradcheck.seed"])
    results = check_gradients(model, batch, tol=cfg["gradcheck.tol"], corrupt=args.corrupt_block)
    failed = [r.name for r in results if not r.passed]
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name} max_rel_error={r.max_rel_error:.3e}")
    print(f"{len(results) - len(failed)}/{len(results)} blocks passed "
          f"in {time.perf_counter() - start:.2f}s")
    if failed:
        print("failing blocks: " + ", ".join(failed), file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "eval": cmd_eval,
    "attention-dump": cmd_attention_dump,
    "gradcheck": cmd_gradcheck,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--threads", type=int, help="worker thread cap (train.threads)")
    common.add_argument("-v", "--verbose", action="store_true")
    for key in DEFAULTS:
        common.add_argument(f"--{key}", dest=f"set:{key}", metavar="VALUE")

    parser = argparse.ArgumentParser(prog="hanet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("gen-data", parents=[common], help="write a synthetic dataset")
    sub.add_parser("train", parents=[common], help="train and write checkpoint + metrics CSV")
    p = sub.add_parser("eval", parents=[common], help="accuracy and per-class accuracy CSV")
    p.add_argument("--checkpoint")
    p.add_argument("--manifest")
    p = sub.add_parser("attention-dump", parents=[common], help="per-frame attention weights CSV")
    p.add_argument("--checkpoint")
    p.add_argument("--manifest")
    p.add_argument("--sample", required=True)
    p = sub.add_parser("gradcheck", parents=[common], help="finite-difference gradient check")
    p.add_argument("--corrupt-block", choices=BLOCK_NAMES, help=argparse.SUPPRESS)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("set:") and v is not None}
    if args.threads is not None:
        overrides["train.threads"] = str(args.threads)
    try:
        cfg = RunConfig.load(args.config, overrides)
        return COMMANDS[args.command](cfg, args)
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, FormatError, HanError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
