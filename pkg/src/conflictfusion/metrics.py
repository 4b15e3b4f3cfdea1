"""Per-class F1, Macro F1, and decision-threshold calibration."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

THRESHOLD_GRID = tuple((25 + k) / 100.0 for k in range(51))  # 0.25 .. 0.75 at 0.01


@dataclass(frozen=True)
class CalibrationResult:
    """Swept decision threshold and the scores it achieves on the sweep data."""

    threshold: float
    macro_f1: float
    f1_ah: float
    f1_noah: float
    alpha: float | None = None
    probabilities: tuple[float, ...] = ()

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "macro_f1": self.macro_f1,
            "f1_ah": self.f1_ah,
            "f1_noah": self.f1_noah,
            "alpha": self.alpha,
        }


def _class_f1(labels: np.ndarray, predictions: np.ndarray, cls: int) -> float:
    tp = int(np.sum((predictions == cls) & (labels == cls)))
    fp = int(np.sum((predictions == cls) & (labels != cls)))
    fn = int(np.sum((predictions != cls) & (labels == cls)))
    denom = 2 * tp + fp + fn
    if denom == 0:
        return 0.0
    return 2 * tp / denom


def f1_scores(labels, predictions) -> tuple[float, float, float]:
    """(f1_ah, f1_noah, macro_f1) from binary vectors; empty-class F1 is 0."""
    labels = np.asarray(labels, dtype=int)
    predictions = np.asarray(predictions, dtype=int)
    if labels.size == 0:
        raise ValueError("f1_scores needs at least one sample")
    if labels.shape != predictions.shape:
        raise ValueError(f"shape mismatch: {labels.shape} vs {predictions.shape}")
    f1_ah = _class_f1(labels, predictions, 1)
    f1_noah = _class_f1(labels, predictions, 0)
    return f1_ah, f1_noah, (f1_ah + f1_noah) / 2.0


def apply_threshold(probabilities, threshold: float) -> np.ndarray:
    """Hard labels: 1 where p >= threshold."""
    return (np.asarray(probabilities, dtype=np.float64) >= threshold).astype(int)


def calibrate_threshold(labels, probabilities, alpha: float | None = None) -> CalibrationResult:
    """Exhaustive sweep of the 51 thresholds in [0.25, 0.75] at 0.01 resolution.

    Returns the Macro-F1 maximiser; ties break toward the smallest threshold.
    """
    labels = np.asarray(labels, dtype=int)
    probs = np.asarray(probabilities, dtype=np.float64)
    if labels.size == 0:
        raise ValueError("calibrate_threshold needs at least one sample")
    if labels.shape != probs.shape:
        raise ValueError(f"shape mismatch: {labels.shape} vs {probs.shape}")
    if probs.min() < 0.0 or probs.max() > 1.0:
        raise ValueError("probabilities must lie in [0, 1]")

    best = None
    for tau in THRESHOLD_GRID:
        f1_ah, f1_noah, macro = f1_scores(labels, apply_threshold(probs, tau))
        if best is None or macro > best[0]:
            best = (macro, tau, f1_ah, f1_noah)
    macro, tau, f1_ah, f1_noah = best
    return CalibrationResult(
        threshold=tau,
        macro_f1=macro,
        f1_ah=f1_ah,
        f1_noah=f1_noah,
        alpha=alpha,
        probabilities=tuple(float(p) for p in probs),
    )
