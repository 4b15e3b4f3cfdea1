"""Test-time inference: multi-window averaging, checkpoint ensembling, split
evaluation with a per-sample audit trail."""

from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .batching import make_batch
from .checkpoint import Checkpoint
from .manifest import Sample
from .metrics import CalibrationResult, calibrate_threshold, f1_scores
from .network import blend, forward


class UnlabeledSplitError(ValueError):
    """Raised when a metric computation is asked for on unlabeled data."""


def _sample_rng(seed: int, sample_id: str) -> np.random.Generator:
    """Stable per-sample stream: hashes the id so window choice depends only on
    (seed, id), never on dataset position or checkpoint order."""
    digest = hashlib.sha256(sample_id.encode("utf-8")).digest()
    words = struct.unpack("<4I", digest[:16])
    return np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFF, *words]))


def choose_windows(sample: Sample, n_windows: int, seed: int) -> list[int]:
    """min(N, available) distinct window indices, sampled without replacement."""
    if n_windows < 1:
        raise ValueError("n_windows must be >= 1")
    available = sample.n_windows
    if n_windows >= available:
        return list(range(available))
    rng = _sample_rng(seed, sample.id)
    picked = rng.choice(available, size=n_windows, replace=False)
    return sorted(int(i) for i in picked)


@dataclass(frozen=True)
class PredictionDetail:
    probability: float
    window_indices: tuple[int, ...]
    per_checkpoint: tuple[float, ...]          # window-averaged probability per member
    conflict_model: tuple[float, float, float] | None  # mean ||c_va||, ||c_vt||, ||c_at||


def predict_sample(sample: Sample, checkpoints: list[Checkpoint], n_windows: int,
                   alpha: float, seed: int = 0, detail: bool = False):
    """Blend per window, average over windows, then over checkpoints.

    The window subset is drawn once per sample and shared by every checkpoint,
    and both averages use exact summation, so the result is invariant to
    checkpoint order and to the order windows are reduced in.
    """
    if not checkpoints:
        raise ValueError("at least one checkpoint is required")
    indices = choose_windows(sample, n_windows, seed)
    batch = make_batch([sample] * len(indices), indices)
    member_probs = []
    conflict_model = None
    for k, ckpt in enumerate(checkpoints):
        result = forward(ckpt.params, batch, train=False)
        window_probs = np.atleast_1d(blend(result.logit_text.data, result.logit_full.data, alpha))
        member_probs.append(math.fsum(window_probs) / len(indices))
        if detail and k == 0 and ckpt.params.config.conflict_features:
            norms = result.conflict_norms()
            conflict_model = tuple(math.fsum(norms[key]) / len(indices)
                                   for key in ("va", "vt", "at"))
    probability = math.fsum(member_probs) / len(checkpoints)
    if not detail:
        return probability
    return PredictionDetail(
        probability=probability,
        window_indices=tuple(indices),
        per_checkpoint=tuple(member_probs),
        conflict_model=conflict_model,
    )


def raw_conflict_norms(sample: Sample) -> tuple[float, float, float]:
    """Disagreement in the input space: L2 distances between the mean-pooled
    raw modality embeddings (video pooled over all windows' valid tokens)."""
    video_tokens = np.concatenate([w.valid_tokens for w in sample.video_windows()], axis=0)
    v = video_tokens.mean(axis=0, dtype=np.float64)
    a = sample.audio_seq().valid_tokens.mean(axis=0, dtype=np.float64)
    t = sample.text_seq().valid_tokens.mean(axis=0, dtype=np.float64)
    return (
        float(np.linalg.norm(v - a)),
        float(np.linalg.norm(v - t)),
        float(np.linalg.norm(a - t)),
    )


@dataclass(frozen=True)
class AuditRecord:
    id: str
    label: int | None
    probability: float
    prediction: int
    conflict_raw: tuple[float, float, float]
    conflict_model: tuple[float, float, float] | None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "label": self.label,
            "probability": self.probability,
            "prediction": self.prediction,
            "conflict_raw": {"va": self.conflict_raw[0], "vt": self.conflict_raw[1],
                             "at": self.conflict_raw[2]},
            "conflict_model": None if self.conflict_model is None else
                              {"va": self.conflict_model[0], "vt": self.conflict_model[1],
                               "at": self.conflict_model[2]},
        }


@dataclass
class EvaluationReport:
    run_id: str
    config_digest: str
    split: str
    macro_f1: float
    f1_ah: float
    f1_noah: float
    threshold: float
    alpha: float
    n_windows: int
    ensemble_size: int
    checkpoints: list[str]
    samples: list[AuditRecord] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "config_digest": self.config_digest,
            "split": self.split,
            "macro_f1": self.macro_f1,
            "f1_ah": self.f1_ah,
            "f1_noah": self.f1_noah,
            "threshold": self.threshold,
            "alpha": self.alpha,
            "n_windows": self.n_windows,
            "ensemble_size": self.ensemble_size,
            "checkpoints": self.checkpoints,
            "samples": [rec.to_dict() for rec in self.samples],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)


def _eval_config_digest(split: str, digests: list[str], alpha: float, n_windows: int,
                        threshold: float, seed: int) -> str:
    payload = json.dumps({
        "alpha": alpha,
        "checkpoints": sorted(digests),
        "n_windows": n_windows,
        "seed": seed,
        "split": split,
        "threshold": threshold,
    }, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(payload).hexdigest()[:12]


def calibrate_on_split(samples: list[Sample], checkpoints: list[Checkpoint], n_windows: int,
                       alpha: float, seed: int = 0) -> CalibrationResult:
    """Sweep the decision threshold on a labelled split under the exact
    inference settings (windows, blend, ensemble) that will be used at test time."""
    if not samples:
        raise ValueError("split is empty")
    if any(s.label is None for s in samples):
        raise UnlabeledSplitError("threshold calibration requires labels")
    labels = np.array([s.label for s in samples], dtype=int)
    probs = np.array([predict_sample(s, checkpoints, n_windows, alpha, seed=seed)
                      for s in samples], dtype=np.float64)
    return calibrate_threshold(labels, probs, alpha=alpha)


def evaluate_split(samples: list[Sample], checkpoints: list[Checkpoint], n_windows: int,
                   alpha: float, threshold: float, seed: int = 0) -> EvaluationReport:
    """Score a labelled split; the report carries everything needed to recompute
    its own metrics from the per-sample audit records."""
    if not samples:
        raise ValueError("split is empty")
    unlabeled = [s.id for s in samples if s.label is None]
    if unlabeled:
        raise UnlabeledSplitError(
            f"{len(unlabeled)} samples have no label (first: {unlabeled[0]!r}); "
            "metrics are undefined on unlabeled data — use `predict` instead")

    records = []
    for sample in samples:
        det = predict_sample(sample, checkpoints, n_windows, alpha, seed=seed, detail=True)
        records.append(AuditRecord(
            id=sample.id,
            label=sample.label,
            probability=det.probability,
            prediction=int(det.probability >= threshold),
            conflict_raw=raw_conflict_norms(sample),
            conflict_model=det.conflict_model,
        ))
    labels = np.array([r.label for r in records], dtype=int)
    preds = np.array([r.prediction for r in records], dtype=int)
    f1_ah, f1_noah, macro = f1_scores(labels, preds)

    digests = [c.digest() for c in checkpoints]
    cfg_digest = _eval_config_digest(samples[0].split, digests, alpha, n_windows,
                                     threshold, seed)
    return EvaluationReport(
        run_id=f"{samples[0].split}-{cfg_digest}",
        config_digest=cfg_digest,
        split=samples[0].split,
        macro_f1=macro,
        f1_ah=f1_ah,
        f1_noah=f1_noah,
        threshold=threshold,
        alpha=alpha,
        n_windows=n_windows,
        ensemble_size=len(checkpoints),
        checkpoints=digests,
        samples=records,
    )


def predict_csv(samples: list[Sample], checkpoints: list[Checkpoint], n_windows: int,
                alpha: float, threshold: float, seed: int = 0) -> str:
    """CSV (id,probability,label) for unlabeled data, one row per sample."""
    lines = ["id,probability,label"]
    for sample in samples:
        p = predict_sample(sample, checkpoints, n_windows, alpha, seed=seed)
        lines.append(f"{sample.id},{p:.6f},{int(p >= threshold)}")
    return "\n".join(lines) + "\n"
