"""Command-line interface: synth, train, calibrate, evaluate, predict, ablate,
gradcheck. Options come from a JSON config file plus flag overrides (flags
win); unknown config keys are rejected. Every artifact-producing run writes
its fully-resolved configuration next to its outputs.

Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 numerical
failure (non-finite loss or a failed gradient check)."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .ablation import ablate, render_table, rows_to_jsonl
from .batching import DataError, make_batch
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .embeddings import EmbeddingFormatError, EmbeddingSequence
from .gradcheck import GradCheckError, grad_check
from .inference import (UnlabeledSplitError, calibrate_on_split, evaluate_split,
                        predict_csv)
from .manifest import ManifestError, Sample, read_manifest, split_samples
from .network import ModelParams, forward
from .synthetic import SynthConfig, generate_dataset
from .training import (TrainConfig, TrainingDivergedError, batch_targets,
                       history_to_jsonl, joint_loss, train)


class UsageError(Exception):
    """Bad flags or config keys; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _opt(parser, name, default, kind=None, help=""):
    """Declare one semantic option: a CLI flag whose absence (None) falls back
    to the JSON config and then to `default`."""
    flag = "--" + name.replace("_", "-")
    if isinstance(default, bool):
        parser.add_argument(flag, dest=name, action=argparse.BooleanOptionalAction,
                            default=None, help=help)
    elif kind is list:
        parser.add_argument(flag, dest=name, action="append", default=None, help=help)
    else:
        if kind is None:
            kind = type(default) if default is not None else str
        parser.add_argument(flag, dest=name, type=kind, default=None, help=help)
    parser._option_defaults[name] = default


def _resolve(ns) -> dict:
    """Merge CLI > config file > declared default, rejecting unknown file keys."""
    defaults = ns._parser._option_defaults
    file_cfg = {}
    if getattr(ns, "config", None):
        path = Path(ns.config)
        try:
            file_cfg = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}: invalid JSON ({exc.msg}, line {exc.lineno})")
        if not isinstance(file_cfg, dict):
            raise UsageError(f"{path}: config must be a JSON object")
        unknown = set(file_cfg) - set(defaults)
        if unknown:
            raise UsageError(f"{path}: unknown config keys {sorted(unknown)}")
    resolved = {}
    for name, default in defaults.items():
        cli = getattr(ns, name, None)
        resolved[name] = cli if cli is not None else file_cfg.get(name, default)
    return resolved


def _require(resolved: dict, name: str):
    if resolved.get(name) is None:
        raise UsageError(f"--{name.replace('_', '-')} is required")
    return resolved[name]


def _modalities(value) -> tuple[str, ...]:
    if isinstance(value, str):
        value = [v.strip() for v in value.split(",") if v.strip()]
    return tuple(value)


def _betas(value) -> tuple[float, float]:
    if isinstance(value, str):
        value = [float(v) for v in value.split(",")]
    pair = tuple(float(v) for v in value)
    if len(pair) != 2:
        raise UsageError(f"betas needs exactly two values, got {list(pair)}")
    return pair


def _write_resolved(path: Path, command: str, resolved: dict) -> None:
    payload = {"command": command}
    payload.update({k: (list(v) if isinstance(v, tuple) else v) for k, v in resolved.items()})
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _load_split(manifest_path, split: str):
    samples = read_manifest(manifest_path)
    members = split_samples(samples, split)
    if not members:
        raise DataError(f"{manifest_path}: split {split!r} has no samples")
    return samples, members


def _load_checkpoints(resolved) -> list:
    paths = _require(resolved, "checkpoint")
    return [load_checkpoint(p) for p in paths]


def _pick_threshold(resolved, all_samples, checkpoints) -> float:
    """Explicit --threshold wins; otherwise sweep on the manifest's val split
    under the same inference settings."""
    if resolved["threshold"] is not None:
        return float(resolved["threshold"])
    val = split_samples(all_samples, "val")
    if not val:
        raise DataError("no val split to calibrate on; pass --threshold explicitly")
    calib = calibrate_on_split(val, checkpoints, resolved["n_windows"],
                               resolved["alpha"], seed=resolved["seed"])
    return calib.threshold


# ---------------------------------------------------------------- subcommands

def cmd_synth(ns) -> int:
    resolved = _resolve(ns)
    out = Path(_require(resolved, "out"))
    synth_kwargs = {k: v for k, v in resolved.items() if k != "out"}
    cfg = SynthConfig(**synth_kwargs)
    out.mkdir(parents=True, exist_ok=True)
    manifest = generate_dataset(cfg, out)
    _write_resolved(out / "synth_config.json", "synth", resolved)
    print(f"synth: wrote {manifest} ({2 * cfg.n_per_class} samples)")
    return 0


_TRAIN_FIELDS = ("lr", "min_lr", "weight_decay", "betas", "eps", "batch_size",
                 "accum_steps", "max_epochs", "patience", "label_smoothing",
                 "loss_weight", "pos_weight", "dropout", "seed", "conflict_features",
                 "modalities", "dim", "head_hidden", "text_head_ffn", "alpha",
                 "val_sweep")


def _train_config(resolved) -> TrainConfig:
    kwargs = {k: resolved[k] for k in _TRAIN_FIELDS}
    kwargs["betas"] = _betas(kwargs["betas"])
    kwargs["modalities"] = _modalities(kwargs["modalities"])
    return TrainConfig(**kwargs)


def _add_train_options(parser):
    _opt(parser, "lr", 3e-5, float, "peak learning rate")
    _opt(parser, "min_lr", 3e-7, float, "cosine floor")
    _opt(parser, "weight_decay", 1e-2, float)
    _opt(parser, "betas", "0.9,0.999", str, "AdamW betas, comma-separated")
    _opt(parser, "eps", 1e-8, float)
    _opt(parser, "batch_size", 4, int)
    _opt(parser, "accum_steps", 4, int, "gradient accumulation groups")
    _opt(parser, "max_epochs", 60, int)
    _opt(parser, "patience", 15, int, "early-stopping patience, epochs")
    _opt(parser, "label_smoothing", 0.0, float)
    _opt(parser, "loss_weight", 0.5, float, "share of the text-head loss")
    _opt(parser, "pos_weight", None, float, "BCE positive-class weight; default N_neg/N_pos")
    _opt(parser, "dropout", 0.3, float)
    _opt(parser, "seed", 0, int)
    _opt(parser, "conflict_features", True, help="include |v-a|,|v-t|,|a-t| in fusion")
    _opt(parser, "modalities", "video,audio,text", str, "comma-separated subset")
    _opt(parser, "dim", None, int, "projection width; default: input width")
    _opt(parser, "head_hidden", 512, int)
    _opt(parser, "text_head_ffn", False, help="extra FFN block before the text head")
    _opt(parser, "alpha", 0.6, float, "text-blend weight at validation/inference")
    _opt(parser, "val_sweep", "blend", str, "sweep validation thresholds on 'blend' or 'full'")


def cmd_train(ns) -> int:
    resolved = _resolve(ns)
    manifest_path = _require(resolved, "manifest")
    out = Path(_require(resolved, "out"))
    samples = read_manifest(manifest_path)
    train_set = split_samples(samples, "train")
    val_set = split_samples(samples, "val")
    if not train_set or not val_set:
        raise DataError(f"{manifest_path}: training needs non-empty train and val splits")
    cfg = _train_config(resolved)
    result = train(train_set, val_set, cfg, log=print)
    out.mkdir(parents=True, exist_ok=True)
    ckpt_path = out / "checkpoint.cahc"
    save_checkpoint(ckpt_path, result.checkpoint)
    (out / "history.jsonl").write_text(history_to_jsonl(result.history), encoding="utf-8")
    _write_resolved(out / "train_config.json", "train", resolved)
    best = result.checkpoint
    print(f"train: best epoch {best.epoch} val_macro_f1={best.best_val_macro_f1:.4f} "
          f"tau={best.best_threshold:.2f} -> {ckpt_path}")
    return 0


def _add_eval_options(parser, default_split):
    _opt(parser, "split", default_split, str)
    _opt(parser, "alpha", 0.6, float, "text-blend weight")
    _opt(parser, "n_windows", 5, int, "windows sampled per video")
    _opt(parser, "seed", 0, int, "window-sampling seed")
    _opt(parser, "checkpoint", None, list, "checkpoint path; repeat for an ensemble")
    _opt(parser, "out", None, str, "output path")


def cmd_calibrate(ns) -> int:
    resolved = _resolve(ns)
    manifest_path = _require(resolved, "manifest")
    checkpoints = _load_checkpoints(resolved)
    _, members = _load_split(manifest_path, resolved["split"])
    calib = calibrate_on_split(members, checkpoints, resolved["n_windows"],
                               resolved["alpha"], seed=resolved["seed"])
    text = json.dumps(calib.to_dict(), indent=2)
    if resolved["out"]:
        out = Path(resolved["out"])
        out.write_text(text + "\n", encoding="utf-8")
        _write_resolved(out.with_suffix(out.suffix + ".config.json"), "calibrate", resolved)
    print(text)
    return 0


def cmd_evaluate(ns) -> int:
    resolved = _resolve(ns)
    manifest_path = _require(resolved, "manifest")
    checkpoints = _load_checkpoints(resolved)
    all_samples, members = _load_split(manifest_path, resolved["split"])
    tau = _pick_threshold(resolved, all_samples, checkpoints)
    report = evaluate_split(members, checkpoints, resolved["n_windows"],
                            resolved["alpha"], tau, seed=resolved["seed"])
    if resolved["out"]:
        out = Path(resolved["out"])
        out.write_text(report.to_json() + "\n", encoding="utf-8")
        _write_resolved(out.with_suffix(out.suffix + ".config.json"), "evaluate",
                        {**resolved, "threshold": tau})
    print(f"evaluate[{report.split}]: macro_f1={report.macro_f1:.4f} "
          f"f1_ah={report.f1_ah:.4f} f1_noah={report.f1_noah:.4f} tau={tau:.2f} "
          f"alpha={report.alpha} N={report.n_windows} ensemble={report.ensemble_size}")
    return 0


def cmd_predict(ns) -> int:
    resolved = _resolve(ns)
    manifest_path = _require(resolved, "manifest")
    checkpoints = _load_checkpoints(resolved)
    all_samples, members = _load_split(manifest_path, resolved["split"])
    tau = _pick_threshold(resolved, all_samples, checkpoints)
    csv = predict_csv(members, checkpoints, resolved["n_windows"], resolved["alpha"],
                      tau, seed=resolved["seed"])
    if resolved["out"]:
        out = Path(resolved["out"])
        out.write_text(csv, encoding="utf-8")
        _write_resolved(out.with_suffix(out.suffix + ".config.json"), "predict",
                        {**resolved, "threshold": tau})
        print(f"predict: wrote {len(members)} rows to {out}")
    else:
        sys.stdout.write(csv)
    return 0


def cmd_ablate(ns) -> int:
    resolved = _resolve(ns)
    manifest_path = _require(resolved, "manifest")
    out = Path(_require(resolved, "out"))
    samples = read_manifest(manifest_path)
    train_set = split_samples(samples, "train")
    val_set = split_samples(samples, "val")
    test_set = split_samples(samples, "test")
    if not train_set or not val_set or not test_set:
        raise DataError(f"{manifest_path}: ablation needs train, val and test splits")
    cfg = _train_config(resolved)
    rows = ablate(train_set, val_set, test_set, cfg, ensemble=resolved["ensemble"],
                  subset_mode=resolved["subset_mode"], seed=resolved["seed"], log=print)
    out.mkdir(parents=True, exist_ok=True)
    (out / "ablation.jsonl").write_text(rows_to_jsonl(rows), encoding="utf-8")
    table = render_table(rows)
    (out / "ablation.txt").write_text(table, encoding="utf-8")
    _write_resolved(out / "ablate_config.json", "ablate", resolved)
    print(table)
    return 0


def cmd_gradcheck(ns) -> int:
    resolved = _resolve(ns)
    rng = np.random.default_rng(resolved["seed"])
    d_in, length, batch = resolved["dim"], resolved["seq_len"], resolved["batch"]

    def seq():
        tokens = rng.standard_normal((length, d_in)).astype(np.float32)
        valid = int(rng.integers(max(1, length - 2), length + 1))
        return EmbeddingSequence(tokens=tokens, valid_count=valid)

    samples = [
        Sample(id=f"gc-{i}", split="train", label=i % 2,
               video=[seq(), seq()], audio=seq(), text=seq())
        for i in range(batch)
    ]
    cfg = TrainConfig(dim=resolved["proj_dim"], head_hidden=resolved["head_hidden"],
                      conflict_features=resolved["conflict_features"], dropout=0.0,
                      seed=resolved["seed"])
    params = ModelParams.init(cfg.model_config(d_in), rng, dtype=np.float64)
    batch_data = make_batch(samples, [0] * batch, dtype=np.float64)
    targets = batch_targets(batch_data, cfg.label_smoothing)

    def loss():
        result = forward(params, batch_data, train=False)
        return joint_loss(result.logit_full, result.logit_text, targets,
                          cfg.loss_weight, 1.0)

    report = grad_check(loss, params.tensor_list(), rel_tol=resolved["rel_tol"],
                        names=params.names())
    print(report)
    return 0 if report.passed else 3


def build_parser() -> _Parser:
    parser = _Parser(prog="conflictfusion",
                     description="Conflict-aware multimodal fusion over precomputed embeddings")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    def command(name, fn, help):
        p = sub.add_parser(name, help=help)
        p._option_defaults = {}
        p.add_argument("--config", default=None, help="JSON config file; flags override it")
        p.set_defaults(func=fn, _parser=p)
        return p

    p = command("synth", cmd_synth, "generate a synthetic conflict dataset")
    _opt(p, "out", None, str, "output directory")
    _opt(p, "n_per_class", 200, int)
    _opt(p, "dim", 64, int)
    _opt(p, "len_video", 48, int)
    _opt(p, "len_audio", 48, int)
    _opt(p, "len_text", 48, int)
    _opt(p, "windows", 3, int, "video windows per sample")
    _opt(p, "signal", 1.0, float, "mean magnitude c")
    _opt(p, "noise", 0.5, float, "token noise sigma")
    _opt(p, "seed", 0, int)
    _opt(p, "audio_signal", 0.0, float, "fraction of the video signal leaked into audio")
    _opt(p, "length_jitter", 0.25, float)

    p = command("train", cmd_train, "train a model from a manifest")
    _opt(p, "manifest", None, str, "manifest.jsonl path")
    _opt(p, "out", None, str, "output directory")
    _add_train_options(p)

    p = command("calibrate", cmd_calibrate, "sweep the decision threshold on a labelled split")
    _opt(p, "manifest", None, str)
    _add_eval_options(p, "val")

    p = command("evaluate", cmd_evaluate, "score a labelled split")
    _opt(p, "manifest", None, str)
    _add_eval_options(p, "test")
    _opt(p, "threshold", None, float, "decision threshold; default: calibrate on val")

    p = command("predict", cmd_predict, "write id,probability,label CSV for a split")
    _opt(p, "manifest", None, str)
    _add_eval_options(p, "test_unlabeled")
    _opt(p, "threshold", None, float, "decision threshold; default: calibrate on val")

    p = command("ablate", cmd_ablate, "run the component/modality/inference ablation grid")
    _opt(p, "manifest", None, str)
    _opt(p, "out", None, str, "output directory")
    _add_train_options(p)
    _opt(p, "ensemble", True, help="include the 2-checkpoint ensemble row")
    _opt(p, "subset_mode", "retrain", str, "modality rows: 'retrain' or 'zero'")

    p = command("gradcheck", cmd_gradcheck, "finite-difference audit of the full-model gradient")
    _opt(p, "dim", 8, int, "input embedding width")
    _opt(p, "proj_dim", 8, int, "projection width")
    _opt(p, "seq_len", 4, int)
    _opt(p, "batch", 2, int)
    _opt(p, "head_hidden", 16, int)
    _opt(p, "rel_tol", 1e-4, float)
    _opt(p, "seed", 0, int)
    _opt(p, "conflict_features", True)
    return parser


def main(argv=None) -> int:
    try:
        ns = build_parser().parse_args(argv)
        return ns.func(ns)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # argparse --help
        return int(exc.code or 0)
    except (TrainingDivergedError, GradCheckError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ManifestError, EmbeddingFormatError, DataError, CheckpointError,
            UnlabeledSplitError, FileNotFoundError, IsADirectoryError,
            NotADirectoryError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
