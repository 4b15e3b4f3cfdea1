"""Ablation harness: three row groups (component, modality, inference) built
from retraining where the architecture changes and from inference-only
re-evaluation where it does not."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

from .checkpoint import Checkpoint
from .inference import calibrate_on_split, evaluate_split
from .manifest import Sample
from .training import TrainConfig, train

ALPHA_GRID = (0.0, 0.5, 0.6, 1.0)
MODALITY_SUBSETS = (
    ("video",),
    ("audio",),
    ("text",),
    ("video", "audio"),
    ("video", "text"),
    ("audio", "text"),
    ("video", "audio", "text"),
)
WINDOW_GRID = (1, 3, 5)


@dataclass(frozen=True)
class AblationRow:
    group: str          # component | modality | inference
    name: str
    split: str
    macro_f1: float
    f1_ah: float
    f1_noah: float
    threshold: float
    alpha: float
    n_windows: int
    ensemble_size: int
    retrained: bool
    run_id: str
    config_digest: str

    def to_dict(self) -> dict:
        return {
            "group": self.group,
            "name": self.name,
            "split": self.split,
            "macro_f1": self.macro_f1,
            "f1_ah": self.f1_ah,
            "f1_noah": self.f1_noah,
            "threshold": self.threshold,
            "alpha": self.alpha,
            "n_windows": self.n_windows,
            "ensemble_size": self.ensemble_size,
            "retrained": self.retrained,
            "run_id": self.run_id,
            "config_digest": self.config_digest,
        }


def rows_to_jsonl(rows: list[AblationRow]) -> str:
    return "".join(json.dumps(r.to_dict(), sort_keys=False) + "\n" for r in rows)


def render_table(rows: list[AblationRow]) -> str:
    """Human-readable rendering, one section per row group."""
    sections = {"component": [], "modality": [], "inference": []}
    for row in rows:
        sections[row.group].append(row)
    out = []
    for group, members in sections.items():
        if not members:
            continue
        out.append(f"== {group} ==")
        name_width = max(len(r.name) for r in members)
        out.append(f"{'name':<{name_width}}  macro_f1  f1_ah   f1_noah  alpha  N  ens")
        for r in members:
            out.append(f"{r.name:<{name_width}}  {r.macro_f1:8.4f}  {r.f1_ah:.4f}  "
                       f"{r.f1_noah:.4f}   {r.alpha:.2f}   {r.n_windows}  {r.ensemble_size}")
        out.append("")
    return "\n".join(out)


def _row(group: str, name: str, samples, checkpoints, n_windows, alpha, tau,
         retrained, seed) -> AblationRow:
    report = evaluate_split(samples, checkpoints, n_windows, alpha, tau, seed=seed)
    return AblationRow(
        group=group,
        name=name,
        split=report.split,
        macro_f1=report.macro_f1,
        f1_ah=report.f1_ah,
        f1_noah=report.f1_noah,
        threshold=tau,
        alpha=alpha,
        n_windows=n_windows,
        ensemble_size=len(checkpoints),
        retrained=retrained,
        run_id=report.run_id,
        config_digest=report.config_digest,
    )


def _calibrated_row(group, name, eval_samples, val_samples, checkpoints, n_windows,
                    alpha, retrained, seed) -> AblationRow:
    calib = calibrate_on_split(val_samples, checkpoints, n_windows, alpha, seed=seed)
    return _row(group, name, eval_samples, checkpoints, n_windows, alpha,
                calib.threshold, retrained, seed)


def ablate(train_samples: list[Sample], val_samples: list[Sample],
           test_samples: list[Sample], cfg: TrainConfig, *,
           ensemble: bool = True, subset_mode: str = "retrain",
           seed: int = 0, log=None) -> list[AblationRow]:
    """Build the full grid. Component and inference rows score the test split;
    modality rows score validation. Rows that only change inference settings
    (the alpha sweep, window counts, ensembling) reuse the base checkpoint;
    rows that change the architecture retrain. Every row's threshold is swept
    on validation under that row's own inference settings.

    subset_mode "retrain" trains one model per modality subset; "zero" reuses
    the base model and zeroes the excluded modalities at inference.
    """
    if subset_mode not in ("retrain", "zero"):
        raise ValueError("subset_mode must be 'retrain' or 'zero'")

    def trained(config: TrainConfig, tag: str) -> Checkpoint:
        if log:
            log(f"ablate: training {tag}")
        return train(train_samples, val_samples, config, log=None).checkpoint

    base_ckpt = trained(cfg, "base")
    rows: list[AblationRow] = []

    # Component group (test split, single-window): conflict off retrains,
    # the alpha sweep reuses the base checkpoint.
    no_conflict = trained(replace(cfg, conflict_features=False), "no_conflict")
    rows.append(_calibrated_row("component", "no_conflict", test_samples, val_samples,
                                [no_conflict], 1, cfg.alpha, True, seed))
    for alpha in ALPHA_GRID:
        rows.append(_calibrated_row("component", f"alpha_{alpha:.1f}", test_samples,
                                    val_samples, [base_ckpt], 1, alpha, False, seed))

    # Modality group (validation split, single-window).
    for subset in MODALITY_SUBSETS:
        name = "".join(m[0] for m in subset)
        if subset_mode == "retrain":
            ckpt = trained(replace(cfg, modalities=subset), name)
            retrained = True
        else:
            zeroed_cfg = replace(base_ckpt.params.config,
                                 use_video="video" in subset,
                                 use_audio="audio" in subset,
                                 use_text="text" in subset)
            ckpt = replace_params_config(base_ckpt, zeroed_cfg)
            retrained = False
        rows.append(_calibrated_row("modality", name, val_samples, val_samples,
                                    [ckpt], 1, cfg.alpha, retrained, seed))

    # Inference group (test split): window counts, then the 2-checkpoint ensemble.
    for n in WINDOW_GRID:
        rows.append(_calibrated_row("inference", f"windows_{n}", test_samples,
                                    val_samples, [base_ckpt], n, cfg.alpha, False, seed))
    if ensemble:
        partner_cfg = replace(cfg, seed=cfg.seed + 1, label_smoothing=0.1)
        partner = trained(partner_cfg, "ensemble partner")
        rows.append(_calibrated_row("inference", "ensemble_2x5", test_samples, val_samples,
                                    [base_ckpt, partner], 5, cfg.alpha, True, seed))
    return rows


def replace_params_config(ckpt: Checkpoint, config) -> Checkpoint:
    """Same weights, different modality gating — used by subset_mode='zero'."""
    from .network import ModelParams

    params = ModelParams(config, dict(ckpt.params.tensors))
    return Checkpoint(params=params, config=ckpt.config,
                      best_threshold=ckpt.best_threshold,
                      best_val_macro_f1=ckpt.best_val_macro_f1, epoch=ckpt.epoch)
