"""Command-line surface.

Verbs: ``features synth|inspect``, ``train``, ``score``, ``augment``,
``ablate``, ``bench``. Exit status is 0 on success, 1 on usage errors, 2 on
data errors. All randomness flows from explicit --seed flags; outputs are
idempotent given identical inputs and seeds. Set COSMIC_LOG to error, info
or debug to control logging.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import bench as bench_mod
from .augment import augment as augment_dataset, plan_augmentation
from .corpus import CoherenceLabel, Dataset, SystemRun, class_means, load_dataset, split_dataset, write_dataset
from .errors import CosmicError, DatasetError, BenchmarkError
from .features import FeatureSet, load_store, save_store, synth_store, text_key
from .model import (
    ModelConfig,
    clamp01,
    load_checkpoint,
    param_count,
    sample_features,
    save_checkpoint,
    score_sample,
)
from .textmetrics import METRIC_NAMES
from .train import TrainConfig, train

log = logging.getLogger("cosmic")

_LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


class UsageError(Exception):
    def __init__(self, message: str, parser: argparse.ArgumentParser):
        super().__init__(message)
        self.parser = parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1, not argparse's default 2
        raise UsageError(message, self)


def _configure_logging() -> None:
    raw = os.environ.get("COSMIC_LOG", "error").lower()
    if raw not in _LOG_LEVELS:
        print(f"warning: ignoring COSMIC_LOG={raw!r} (expected error/info/debug)", file=sys.stderr)
        raw = "error"
    logging.basicConfig(level=_LOG_LEVELS[raw], format="%(levelname)s %(name)s: %(message)s")


def _add_model_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--no-image", action="store_true", help="drop the image input slot")
    parser.add_argument("--no-coherence", action="store_true", help="drop the coherence-label slots")
    parser.add_argument("--image-dim", type=int, default=2048)
    parser.add_argument("--text-dim", type=int, default=1024)
    parser.add_argument("--embed-dim", type=int, default=512)
    parser.add_argument("--hidden", default="512,256,128,64,32,16,8",
                        help="comma-separated hidden layer sizes")


def _add_train_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--batch-size", type=int, default=10)
    parser.add_argument("--base-lr", type=float, default=1e-3)
    parser.add_argument("--decay-factor", type=float, default=1e-2)
    parser.add_argument("--decay-every", type=int, default=10)
    parser.add_argument("--max-epochs", type=int, default=100)
    parser.add_argument("--patience", type=int, default=3)
    parser.add_argument("--val-tolerance", type=float, default=1e-4)


def _model_config(args) -> ModelConfig:
    try:
        hidden = tuple(int(h) for h in args.hidden.split(",") if h.strip())
    except ValueError:
        raise DatasetError(f"bad --hidden list: {args.hidden!r}") from None
    return ModelConfig(
        use_image=not args.no_image,
        use_coherence=not args.no_coherence,
        image_dim=args.image_dim,
        text_dim=args.text_dim,
        embed_dim=args.embed_dim,
        hidden_sizes=hidden,
    )


def _train_config(args, seed: int) -> TrainConfig:
    return TrainConfig(
        batch_size=args.batch_size,
        base_lr=args.base_lr,
        decay_factor=args.decay_factor,
        decay_every=args.decay_every,
        max_epochs=args.max_epochs,
        patience=args.patience,
        val_tolerance=args.val_tolerance,
        seed=seed,
    )


def _load_features(paths) -> FeatureSet:
    return FeatureSet(*[load_store(p) for p in paths])


def _split_for_training(ds: Dataset, val_fraction: float, seed: int):
    if any(s.split is not None for s in ds.samples):
        train_s = [s for s in ds.samples if s.split != "val"]
        val_s = [s for s in ds.samples if s.split == "val"]
        if not train_s or not val_s:
            raise DatasetError("explicit split fields must leave both train and val nonempty")
        return Dataset(train_s, ds.name + ":train"), Dataset(val_s, ds.name + ":val")
    return split_dataset(ds, val_fraction, seed)


def _read_lines(path) -> list[str]:
    with open(path, "r", encoding="utf-8") as f:
        return [line.rstrip("\n") for line in f if line.strip()]


# --- verb handlers ----------------------------------------------------------


def _cmd_features(args) -> int:
    if args.action == "synth":
        sources = [s for s in (args.keys, args.images, args.texts) if s]
        if len(sources) != 1:
            raise UsageError("provide exactly one of --keys, --images or --texts", args.parser)
        if args.keys:
            keys = _read_lines(args.keys)
        elif args.images:
            keys = ["img:" + k for k in _read_lines(args.images)]
        else:
            keys = sorted({text_key(t) for t in _read_lines(args.texts)})
        store = synth_store(keys, args.dim, args.seed)
        n_bytes = save_store(store, args.out)
        log.info("wrote %d vectors (%d bytes) to %s", len(store), n_bytes, args.out)
        print(f"{args.out}: {len(store)} vectors, dim {args.dim}, {n_bytes} bytes")
        return 0
    store = load_store(args.store)
    if args.json:
        print(json.dumps({"dim": store.dim, "count": len(store), "keys": sorted(store.entries)}))
    else:
        print(f"{args.store}: dim {store.dim}, {len(store)} vectors")
        for key in sorted(store.entries)[: args.limit]:
            print(f"  {key}")
        if len(store) > args.limit:
            print(f"  ... {len(store) - args.limit} more")
    return 0


def _cmd_train(args) -> int:
    ds = load_dataset(args.data)
    if not ds.samples:
        raise DatasetError(f"{args.data}: dataset is empty")
    ds_train, ds_val = _split_for_training(ds, args.val_fraction, args.seed)
    feats = _load_features(args.features)
    mconfig = _model_config(args)
    tconfig = _train_config(args, args.seed)
    log.info("training on %d samples (%d val), %d parameters",
             len(ds_train), len(ds_val), param_count(mconfig))
    params, history = train(ds_train, ds_val, feats, mconfig, tconfig)
    save_checkpoint(args.out_model, params, mconfig)
    if args.history:
        history.write_jsonl(args.history)
    summary = {
        "train_samples": len(ds_train),
        "val_samples": len(ds_val),
        "param_count": param_count(mconfig),
        "stopped_epoch": history.stopped_epoch,
        "stop_reason": history.stop_reason,
        "final_train_loss": history.train_loss[-1],
        "final_val_loss": history.val_loss[-1],
        "best_val_loss": min(history.val_loss),
        "model": str(args.out_model),
    }
    print(json.dumps(summary) if args.json else
          f"stopped at epoch {history.stopped_epoch} ({history.stop_reason}); "
          f"train {history.train_loss[-1]:.6f}, val {history.val_loss[-1]:.6f} -> {args.out_model}")
    return 0


def _cmd_score(args) -> int:
    params, config = load_checkpoint(args.model)
    feats = _load_features(args.features)
    ds = load_dataset(args.data)
    if not ds.samples:
        raise DatasetError(f"{args.data}: dataset is empty")
    rows = []
    for sample in ds.samples:
        raw = score_sample(params, config, sample_features(feats, config, sample))
        rows.append({
            "image_key": sample.image_key,
            "score": raw,
            "score_clamped": clamp01(raw),
            "target": sample.target,
        })
    with open(args.out, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row) + "\n")
    mse = sum((r["score"] - r["target"]) ** 2 for r in rows) / len(rows)
    print(json.dumps({"count": len(rows), "mse": mse, "out": str(args.out)}) if args.json
          else f"scored {len(rows)} samples (mse vs targets {mse:.6f}) -> {args.out}")
    return 0


def _cmd_augment(args) -> int:
    ds = load_dataset(args.data)
    plan = plan_augmentation(ds, args.tolerance, args.target)
    before = class_means(ds)
    augmented = augment_dataset(ds, plan, args.seed)
    write_dataset(augmented, args.out)
    after = class_means(augmented)
    payload = {
        "target_mean": plan.target_mean,
        "added": {label.value: plan.counts.get(label, 0) for label in CoherenceLabel},
        "means_before": {l.value: round(m, 6) for l, m in before.items()},
        "means_after": {l.value: round(m, 6) for l, m in after.items()},
        "out": str(args.out),
    }
    if args.json:
        print(json.dumps(payload))
    else:
        print(f"target mean {plan.target_mean:.4f}; wrote {len(augmented)} samples -> {args.out}")
        for label in CoherenceLabel:
            if label in before:
                print(f"  {label.value:<11} mean {before[label]:.4f} -> {after[label]:.4f} "
                      f"(+{plan.counts.get(label, 0)} negatives)")
    return 0


_ABLATIONS = (
    ("full", True, True),
    ("no_image", False, True),
    ("no_coherence", True, False),
    ("no_image_no_coherence", False, False),
)


def _cmd_ablate(args) -> int:
    ds = load_dataset(args.data)
    ds_train, ds_val = _split_for_training(ds, args.val_fraction, args.seed)
    feats = _load_features(args.features)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    base = _model_config(args)
    results = []
    for name, use_image, use_coherence in _ABLATIONS:
        mconfig = ModelConfig(
            use_image=use_image,
            use_coherence=use_coherence,
            image_dim=base.image_dim,
            text_dim=base.text_dim,
            embed_dim=base.embed_dim,
            hidden_sizes=base.hidden_sizes,
        )
        tconfig = _train_config(args, args.seed)
        log.info("ablation %s: %d parameters", name, param_count(mconfig))
        params, history = train(ds_train, ds_val, feats, mconfig, tconfig)
        save_checkpoint(out_dir / f"{name}.ckpt", params, mconfig)
        history.write_jsonl(out_dir / f"{name}.history.jsonl")
        summary = {
            "config": name,
            "param_count": param_count(mconfig),
            "stopped_epoch": history.stopped_epoch,
            "stop_reason": history.stop_reason,
            "final_train_loss": history.train_loss[-1],
            "best_val_loss": min(history.val_loss),
        }
        with open(out_dir / f"{name}.summary.json", "w", encoding="utf-8") as f:
            json.dump(summary, f, indent=2)
        results.append(summary)
    if args.json:
        print(json.dumps(results))
    else:
        for r in results:
            print(f"{r['config']:<22} params {r['param_count']:>9}  "
                  f"best val {r['best_val_loss']:.6f}  ({r['stop_reason']})")
    return 0


def _load_systems_dir(path) -> list[SystemRun]:
    files = sorted(Path(path).glob("*.json"))
    if not files:
        raise BenchmarkError(f"no *.json system files in {path}")
    runs = []
    for file in files:
        with open(file, "r", encoding="utf-8") as f:
            obj = json.load(f)
        for field in ("name", "coherence", "outputs"):
            if field not in obj:
                raise BenchmarkError(f"{file}: missing field {field!r}")
        runs.append(SystemRun(
            system_name=obj["name"],
            coherence=CoherenceLabel.parse(obj["coherence"]),
            outputs=dict(obj["outputs"]),
        ))
    by_name = {run.system_name: run for run in runs}
    if set(by_name) == set(bench_mod.CANONICAL_SYSTEMS):
        return [by_name[name] for name in bench_mod.CANONICAL_SYSTEMS]
    return sorted(runs, key=lambda r: r.system_name)


def _load_references(path) -> dict[str, str]:
    refs: dict[str, str] = {}
    for lineno, line in enumerate(_read_lines(path), start=1):
        try:
            obj = json.loads(line)
            refs[obj["image_key"]] = obj["text"]
        except (json.JSONDecodeError, KeyError, TypeError):
            raise BenchmarkError(f"{path}:{lineno}: expected {{\"image_key\", \"text\"}}") from None
    return refs


def _cmd_bench(args) -> int:
    if args.replay:
        with open(args.replay, "r", encoding="utf-8") as f:
            table = bench_mod.load_score_table_csv(f)
        report = bench_mod.build_report(table, include_tau_a=args.tau_a)
    else:
        for required in ("systems_dir", "references", "human"):
            if getattr(args, required) is None:
                raise UsageError(f"--{required.replace('_', '-')} is required without --replay",
                                 args.parser)
        systems = _load_systems_dir(args.systems_dir)
        references = _load_references(args.references)
        with open(args.human, "r", encoding="utf-8") as f:
            human_by_name = json.load(f)
        missing = [s.system_name for s in systems if s.system_name not in human_by_name]
        if missing:
            raise BenchmarkError(f"no human mean for system {missing[0]!r}")
        metrics = [m.strip() for m in args.metrics.split(",") if m.strip()]
        params = config = feats = None
        if args.model:
            params, config = load_checkpoint(args.model)
            if not args.features:
                raise UsageError("--features is required with --model", args.parser)
            feats = _load_features(args.features)
        report = bench_mod.run_benchmark(
            systems,
            references,
            [float(human_by_name[s.system_name]) for s in systems],
            metrics=metrics,
            model=params,
            model_config=config,
            feature_store=feats,
            include_tau_a=args.tau_a,
        )
    payload = bench_mod.report_to_dict(report)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2)
    print(json.dumps(payload) if args.json else bench_mod.format_report(report))
    return 0


# --- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cosmic", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    p_feat = sub.add_parser("features", help="synthesize or inspect feature stores")
    feat_sub = p_feat.add_subparsers(dest="action", required=True, parser_class=_Parser)
    p_synth = feat_sub.add_parser("synth", help="deterministic synthetic vectors")
    p_synth.add_argument("--keys", help="file of store keys, one per line (used verbatim)")
    p_synth.add_argument("--images", help="file of image keys, one per line (stored as img:<key>)")
    p_synth.add_argument("--texts", help="file of captions, one per line (stored under content keys)")
    p_synth.add_argument("--dim", type=int, required=True)
    p_synth.add_argument("--seed", type=int, required=True)
    p_synth.add_argument("--out", required=True)
    p_inspect = feat_sub.add_parser("inspect", help="print store header and keys")
    p_inspect.add_argument("--store", required=True)
    p_inspect.add_argument("--limit", type=int, default=20)
    p_inspect.add_argument("--json", action="store_true")

    p_train = sub.add_parser("train", help="fit the learned metric")
    p_train.add_argument("--data", required=True)
    p_train.add_argument("--features", action="append", required=True,
                         help="feature store path (repeat for image + caption stores)")
    p_train.add_argument("--val-fraction", type=float, default=0.1)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--out-model", required=True)
    p_train.add_argument("--history", help="write per-epoch JSONL here")
    p_train.add_argument("--json", action="store_true")
    _add_model_flags(p_train)
    _add_train_flags(p_train)

    p_score = sub.add_parser("score", help="apply a trained metric to a dataset")
    p_score.add_argument("--model", required=True)
    p_score.add_argument("--features", action="append", required=True)
    p_score.add_argument("--data", required=True)
    p_score.add_argument("--out", required=True)
    p_score.add_argument("--json", action="store_true")

    p_aug = sub.add_parser("augment", help="append bias-balancing negative samples")
    p_aug.add_argument("--data", required=True)
    p_aug.add_argument("--tolerance", type=float, default=0.0)
    p_aug.add_argument("--target", type=float, default=None)
    p_aug.add_argument("--seed", type=int, default=0)
    p_aug.add_argument("--out", required=True)
    p_aug.add_argument("--json", action="store_true")

    p_abl = sub.add_parser("ablate", help="train the four input-slot configurations")
    p_abl.add_argument("--data", required=True)
    p_abl.add_argument("--features", action="append", required=True)
    p_abl.add_argument("--val-fraction", type=float, default=0.1)
    p_abl.add_argument("--seed", type=int, default=0)
    p_abl.add_argument("--out-dir", required=True)
    p_abl.add_argument("--json", action="store_true")
    _add_model_flags(p_abl)
    _add_train_flags(p_abl)

    p_bench = sub.add_parser("bench", help="rank captioning systems against human means")
    p_bench.add_argument("--replay", help="stored score-table CSV to re-rank")
    p_bench.add_argument("--systems-dir", help="directory of per-system JSON files")
    p_bench.add_argument("--references", help="JSONL of {image_key, text} reference captions")
    p_bench.add_argument("--human", help="JSON map of system name -> mean human rating")
    p_bench.add_argument("--metrics", default=",".join(METRIC_NAMES))
    p_bench.add_argument("--model", help="checkpoint for the learned-metric column")
    p_bench.add_argument("--features", action="append")
    p_bench.add_argument("--out", help="write the report JSON here")
    p_bench.add_argument("--tau-a", action="store_true", help="also report non-tie-corrected taus")
    p_bench.add_argument("--json", action="store_true")

    return parser


_HANDLERS = {
    "features": _cmd_features,
    "train": _cmd_train,
    "score": _cmd_score,
    "augment": _cmd_augment,
    "ablate": _cmd_ablate,
    "bench": _cmd_bench,
}


def dispatch(argv: list[str]) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.parser = parser
        return _HANDLERS[args.verb](args)
    except UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        print(err.parser.format_usage(), end="", file=sys.stderr)
        return 1
    except SystemExit as err:  # argparse --help
        return int(err.code or 0)
    except CosmicError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
