"""Joint two-head training: label smoothing, class weighting, gradient
accumulation, cosine schedule, early stopping on validation Macro F1."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict, replace

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .batching import Batch, make_batch
from .manifest import Sample
from .metrics import CalibrationResult, calibrate_threshold
from .network import BlendConfig, ForwardResult, ModelConfig, ModelParams, blend, forward
from .optim import OptimState, adamw_step, cosine_lr

MODALITIES = ("video", "audio", "text")


class TrainingDivergedError(RuntimeError):
    """Loss went non-finite; carries where."""

    def __init__(self, epoch: int, batch_index: int):
        super().__init__(f"non-finite loss at epoch {epoch}, batch {batch_index}")
        self.epoch = epoch
        self.batch_index = batch_index


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 3e-5
    min_lr: float = 3e-7
    weight_decay: float = 1e-2
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    batch_size: int = 4
    accum_steps: int = 4
    max_epochs: int = 60
    patience: int = 15
    label_smoothing: float = 0.0
    loss_weight: float = 0.5          # w: share of the text-head loss
    pos_weight: float | None = None   # None: computed as N_neg/N_pos on the train split
    dropout: float = 0.3
    seed: int = 0
    conflict_features: bool = True
    modalities: tuple[str, ...] = MODALITIES
    dim: int | None = None            # projection width; None: keep the input width
    head_hidden: int = 512
    text_head_ffn: bool = False
    alpha: float = 0.6                # validation-time blend weight
    val_sweep: str = "blend"          # sweep thresholds on blended or full-only probabilities

    def __post_init__(self):
        if self.patience > self.max_epochs:
            raise ValueError("patience must be <= max_epochs")
        if not 0.0 <= self.label_smoothing < 1.0:
            raise ValueError("label_smoothing must be in [0, 1)")
        if not 0.0 <= self.loss_weight <= 1.0:
            raise ValueError("loss_weight must be in [0, 1]")
        if self.batch_size < 1 or self.accum_steps < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ValueError("batch_size, accum_steps, max_epochs, patience must be >= 1")
        if self.pos_weight is not None and self.pos_weight <= 0.0:
            raise ValueError("pos_weight must be positive")
        unknown = set(self.modalities) - set(MODALITIES)
        if unknown:
            raise ValueError(f"unknown modalities {sorted(unknown)}")
        if not self.modalities:
            raise ValueError("at least one modality must be enabled")
        if self.val_sweep not in ("blend", "full"):
            raise ValueError("val_sweep must be 'blend' or 'full'")
        BlendConfig(self.alpha)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["betas"] = list(self.betas)
        d["modalities"] = list(self.modalities)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown TrainConfig keys: {sorted(unknown)}")
        kwargs = dict(data)
        if "betas" in kwargs:
            kwargs["betas"] = tuple(kwargs["betas"])
        if "modalities" in kwargs:
            kwargs["modalities"] = tuple(kwargs["modalities"])
        return cls(**kwargs)

    def model_config(self, d_in: int) -> ModelConfig:
        return ModelConfig(
            d_in=d_in,
            d=self.dim if self.dim is not None else d_in,
            head_hidden=self.head_hidden,
            dropout=self.dropout,
            conflict_features=self.conflict_features,
            use_video="video" in self.modalities,
            use_audio="audio" in self.modalities,
            use_text="text" in self.modalities,
            text_head_ffn=self.text_head_ffn,
        )


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_loss: float
    val_macro_f1: float
    threshold: float
    lr: float

    def to_json(self) -> str:
        return json.dumps({
            "epoch": self.epoch,
            "train_loss": self.train_loss,
            "val_macro_f1": self.val_macro_f1,
            "threshold": self.threshold,
            "lr": self.lr,
        })


def history_to_jsonl(history: list[EpochStats]) -> str:
    return "".join(stat.to_json() + "\n" for stat in history)


def smooth_label(y: int, eps: float) -> float:
    """y(1 - eps) + 0.5*eps."""
    if y not in (0, 1):
        raise ValueError(f"label must be 0 or 1, got {y!r}")
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"smoothing must be in [0, 1), got {eps}")
    return y * (1.0 - eps) + 0.5 * eps


def joint_loss(logit_full: Tensor, logit_text: Tensor, targets: np.ndarray,
               loss_weight: float, pos_weight: float) -> Tensor:
    """(1-w)*BCE(full) + w*BCE(text), each batch-averaged with pos_weight."""
    full = ad.tmean(ad.bce_with_logits(logit_full, targets, pos_weight))
    text = ad.tmean(ad.bce_with_logits(logit_text, targets, pos_weight))
    return ad.add(ad.mul(full, 1.0 - loss_weight), ad.mul(text, loss_weight))


def compute_pos_weight(samples: list[Sample]) -> float:
    """Inverse positive-class frequency, N_neg / N_pos."""
    labels = [s.label for s in samples]
    n_pos = sum(1 for y in labels if y == 1)
    n_neg = sum(1 for y in labels if y == 0)
    if n_pos == 0:
        raise ValueError("train split has no positive samples; set pos_weight explicitly")
    return n_neg / n_pos


def batch_targets(batch: Batch, eps: float) -> np.ndarray:
    if batch.labels is None:
        raise ValueError("cannot build training targets for unlabeled samples")
    return np.array([smooth_label(int(y), eps) for y in batch.labels], dtype=np.float64)


def accumulate_group(params: ModelParams, state: OptimState, batches: list[Batch],
                     cfg: TrainConfig, pos_weight: float, lr: float,
                     rng: np.random.Generator | None = None, train_mode: bool = True,
                     ) -> list[float]:
    """Accumulate gradients over a group of batches and apply one AdamW step.

    Each batch's loss is scaled by 1/len(batches), so a full group matches a
    single step over the concatenated batch. Returns the unscaled losses.
    """
    tensors = params.tensor_list()
    for p in tensors:
        p.zero_grad()
    losses = []
    for batch in batches:
        result = forward(params, batch, train=train_mode, rng=rng)
        targets = batch_targets(batch, cfg.label_smoothing)
        loss = joint_loss(result.logit_full, result.logit_text, targets,
                          cfg.loss_weight, pos_weight)
        losses.append(loss.item())
        ad.mul(loss, 1.0 / len(batches)).backward()
    adamw_step(tensors, state, lr)
    for p in tensors:
        p.zero_grad()
    return losses


def validation_probabilities(params: ModelParams, samples: list[Sample],
                             alpha: float, sweep: str) -> np.ndarray:
    """Blend over every provided window per sample, matching test-time inference."""
    probs = np.empty(len(samples), dtype=np.float64)
    for i, sample in enumerate(samples):
        n = sample.n_windows
        batch = make_batch([sample] * n, list(range(n)))
        result = forward(params, batch, train=False)
        if sweep == "full":
            window_probs = ad.stable_sigmoid(result.logit_full.data)
        else:
            window_probs = blend(result.logit_text.data, result.logit_full.data, alpha)
        probs[i] = math.fsum(np.atleast_1d(window_probs)) / n
    return probs


@dataclass
class TrainResult:
    checkpoint: "Checkpoint"
    history: list[EpochStats]


def train(train_samples: list[Sample], val_samples: list[Sample], cfg: TrainConfig,
          log=None) -> TrainResult:
    """Run the full protocol and return the best-epoch checkpoint plus history.

    RNG policy: one master seed spawns four child streams, in order:
    parameter init, epoch shuffling, window choice, dropout. Identical
    config + data reproduce identical results bit-for-bit.
    """
    from .checkpoint import Checkpoint

    if not train_samples or not val_samples:
        raise ValueError("train and val splits must be non-empty")
    if any(s.label is None for s in train_samples) or any(s.label is None for s in val_samples):
        raise ValueError("train/val samples must be labelled")

    init_ss, shuffle_ss, window_ss, dropout_ss = np.random.SeedSequence(cfg.seed).spawn(4)
    init_rng = np.random.default_rng(init_ss)
    shuffle_rng = np.random.default_rng(shuffle_ss)
    window_rng = np.random.default_rng(window_ss)
    dropout_rng = np.random.default_rng(dropout_ss)

    d_in = train_samples[0].text_seq().dim
    model_cfg = cfg.model_config(d_in)
    params = ModelParams.init(model_cfg, init_rng)
    pos_weight = cfg.pos_weight if cfg.pos_weight is not None else compute_pos_weight(train_samples)
    if log:
        log(f"model: {params.param_count()} parameters (d_in={d_in}, d={model_cfg.d}); "
            f"pos_weight={pos_weight:.6g}")

    n = len(train_samples)
    n_batches = math.ceil(n / cfg.batch_size)
    steps_per_epoch = math.ceil(n_batches / cfg.accum_steps)
    total_steps = cfg.max_epochs * steps_per_epoch
    state = OptimState.for_params(params.tensor_list(), betas=cfg.betas, eps=cfg.eps,
                                  weight_decay=cfg.weight_decay, base_lr=cfg.lr,
                                  min_lr=cfg.min_lr, total_steps=total_steps)

    val_labels = np.array([s.label for s in val_samples], dtype=int)
    best: tuple[float, int, ModelParams, float] | None = None
    epochs_since_improve = 0
    history: list[EpochStats] = []

    for epoch in range(1, cfg.max_epochs + 1):
        order = shuffle_rng.permutation(n)
        batches = []
        for start in range(0, n, cfg.batch_size):
            chunk = [train_samples[i] for i in order[start:start + cfg.batch_size]]
            windows = [int(window_rng.integers(0, s.n_windows)) for s in chunk]
            batches.append(make_batch(chunk, windows))

        epoch_losses = []
        lr = state.base_lr
        for g_start in range(0, len(batches), cfg.accum_steps):
            group = batches[g_start:g_start + cfg.accum_steps]
            lr = cosine_lr(state.t, state.total_steps, state.base_lr, state.min_lr)
            losses = accumulate_group(params, state, group, cfg, pos_weight, lr, dropout_rng)
            for j, value in enumerate(losses):
                if not math.isfinite(value):
                    raise TrainingDivergedError(epoch, g_start + j)
            epoch_losses.extend(losses)

        val_probs = validation_probabilities(params, val_samples, cfg.alpha, cfg.val_sweep)
        calib = calibrate_threshold(val_labels, val_probs, alpha=cfg.alpha)
        stats = EpochStats(
            epoch=epoch,
            train_loss=float(np.mean(epoch_losses)),
            val_macro_f1=calib.macro_f1,
            threshold=calib.threshold,
            lr=lr,
        )
        history.append(stats)
        if log:
            log(f"epoch {epoch}: train_loss={stats.train_loss:.4f} "
                f"val_macro_f1={stats.val_macro_f1:.4f} tau={stats.threshold:.2f}")

        if best is None or calib.macro_f1 > best[0]:
            best = (calib.macro_f1, epoch, params.copy(), calib.threshold)
            epochs_since_improve = 0
        else:
            epochs_since_improve += 1
            if epochs_since_improve >= cfg.patience:
                break

    best_macro, best_epoch, best_params, best_tau = best
    if not best_params.all_finite():
        raise TrainingDivergedError(best_epoch, -1)
    checkpoint = Checkpoint(
        params=best_params,
        config=cfg,
        best_threshold=best_tau,
        best_val_macro_f1=best_macro,
        epoch=best_epoch,
    )
    return TrainResult(checkpoint=checkpoint, history=history)
