"""Scikit-learn style facade over the training and inference pipeline.

X is a list of Sample descriptors (multimodal variable-length sequences do not
fit a feature matrix); y is optional and overrides the samples' own labels.
"""

from __future__ import annotations

import dataclasses

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .inference import predict_sample
from .manifest import Sample
from .metrics import f1_scores
from .training import MODALITIES, TrainConfig, train


def validate_samples(X, require_labels: bool) -> list[Sample]:
    """Input check: a non-empty sequence of Sample descriptors, labelled if needed."""
    samples = list(X)
    if not samples:
        raise ValueError("X must contain at least one sample")
    for i, s in enumerate(samples):
        if not isinstance(s, Sample):
            raise TypeError(f"X[{i}] is {type(s).__name__}, expected Sample")
    if require_labels:
        missing = [s.id for s in samples if s.label is None]
        if missing:
            raise ValueError(f"{len(missing)} samples are unlabeled (first: {missing[0]!r})")
    return samples


def _with_labels(samples: list[Sample], y) -> list[Sample]:
    y = np.asarray(y)
    if len(y) != len(samples):
        raise ValueError(f"y has {len(y)} entries for {len(samples)} samples")
    out = []
    for s, label in zip(samples, y):
        if label not in (0, 1):
            raise ValueError(f"labels must be binary, got {label!r}")
        out.append(dataclasses.replace(s, label=int(label)))
    return out


class ConflictFusionClassifier(BaseEstimator, ClassifierMixin):
    """Binary classifier over precomputed multimodal embeddings.

    fit() holds out a stratified validation fraction for early stopping and
    threshold calibration (or uses X_val/y_val when given); predict() applies
    the calibrated threshold to blended multi-window probabilities.
    """

    def __init__(self, lr=3e-5, max_epochs=60, patience=15, batch_size=4, accum_steps=4,
                 label_smoothing=0.0, loss_weight=0.5, pos_weight=None, dropout=0.3,
                 weight_decay=1e-2, seed=0, conflict_features=True, modalities=MODALITIES,
                 dim=None, head_hidden=512, alpha=0.6, n_windows=5, val_fraction=0.15):
        self.lr = lr
        self.max_epochs = max_epochs
        self.patience = patience
        self.batch_size = batch_size
        self.accum_steps = accum_steps
        self.label_smoothing = label_smoothing
        self.loss_weight = loss_weight
        self.pos_weight = pos_weight
        self.dropout = dropout
        self.weight_decay = weight_decay
        self.seed = seed
        self.conflict_features = conflict_features
        self.modalities = modalities
        self.dim = dim
        self.head_hidden = head_hidden
        self.alpha = alpha
        self.n_windows = n_windows
        self.val_fraction = val_fraction

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            lr=self.lr, max_epochs=self.max_epochs, patience=self.patience,
            batch_size=self.batch_size, accum_steps=self.accum_steps,
            label_smoothing=self.label_smoothing, loss_weight=self.loss_weight,
            pos_weight=self.pos_weight, dropout=self.dropout,
            weight_decay=self.weight_decay, seed=self.seed,
            conflict_features=self.conflict_features, modalities=tuple(self.modalities),
            dim=self.dim, head_hidden=self.head_hidden, alpha=self.alpha,
        )

    def _holdout(self, samples: list[Sample]):
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError(f"val_fraction must be in (0, 1), got {self.val_fraction}")
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, 0x5EED]))
        train_set, val_set = [], []
        for cls in (0, 1):
            members = [s for s in samples if s.label == cls]
            order = rng.permutation(len(members))
            n_val = max(1, int(len(members) * self.val_fraction)) if members else 0
            for pos, idx in enumerate(order):
                (val_set if pos < n_val else train_set).append(members[idx])
        if not train_set or not val_set:
            raise ValueError("not enough samples per class to hold out a validation set")
        return train_set, val_set

    def fit(self, X, y=None, X_val=None, y_val=None):
        samples = validate_samples(X, require_labels=y is None)
        if y is not None:
            samples = _with_labels(samples, y)
        if X_val is not None:
            val = validate_samples(X_val, require_labels=y_val is None)
            if y_val is not None:
                val = _with_labels(val, y_val)
            train_set = samples
        else:
            train_set, val = self._holdout(samples)
        result = train(train_set, val, self._train_config())
        self.checkpoint_ = result.checkpoint
        self.history_ = result.history
        self.threshold_ = result.checkpoint.best_threshold
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = train_set[0].text_seq().dim
        return self

    def predict_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "checkpoint_")
        samples = validate_samples(X, require_labels=False)
        p1 = np.array([
            predict_sample(s, [self.checkpoint_], self.n_windows, self.alpha, seed=self.seed)
            for s in samples
        ], dtype=np.float64)
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X)[:, 1] >= self.threshold_).astype(int)

    def score(self, X, y=None, sample_weight=None) -> float:
        """Macro F1 (not accuracy): the metric the whole pipeline optimises."""
        samples = validate_samples(X, require_labels=y is None)
        labels = np.asarray(y) if y is not None else np.array([s.label for s in samples])
        _, _, macro = f1_scores(labels, self.predict(samples))
        return macro
