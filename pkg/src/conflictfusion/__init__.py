"""Conflict-aware multimodal fusion for binary ambivalence/hesitancy detection
over precomputed video/audio/text embeddings.

The cross-modal disagreement itself is treated as signal: pairwise absolute
differences of the pooled modality vectors feed the fusion head alongside the
modalities, and a text-head blend sets the final probability.
"""

from .ablation import AblationRow, ablate, render_table, rows_to_jsonl
from .autodiff import Tensor
from .batching import Batch, DataError, make_batch
from .checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint
from .embeddings import (EmbeddingFormatError, EmbeddingSequence, read_embedding,
                         write_embedding)
from .estimator import ConflictFusionClassifier
from .gradcheck import GradCheckError, GradCheckReport, grad_check
from .inference import (AuditRecord, EvaluationReport, PredictionDetail,
                        UnlabeledSplitError, calibrate_on_split, evaluate_split,
                        predict_csv, predict_sample)
from .manifest import (ManifestError, Sample, read_manifest, split_samples,
                       write_manifest)
from .metrics import (CalibrationResult, apply_threshold, calibrate_threshold,
                      f1_scores)
from .network import (BlendConfig, ForwardResult, ModelConfig, ModelParams,
                      attention_pool, blend, conflict_features, forward)
from .optim import OptimState, adamw_step, cosine_lr
from .synthetic import SynthConfig, generate_dataset, generate_samples
from .training import (EpochStats, TrainConfig, TrainResult, TrainingDivergedError,
                       history_to_jsonl, joint_loss, smooth_label, train)

__version__ = "0.1.0"

__all__ = [
    "AblationRow", "ablate", "render_table", "rows_to_jsonl",
    "Tensor",
    "Batch", "DataError", "make_batch",
    "Checkpoint", "CheckpointError", "load_checkpoint", "save_checkpoint",
    "EmbeddingFormatError", "EmbeddingSequence", "read_embedding", "write_embedding",
    "ConflictFusionClassifier",
    "GradCheckError", "GradCheckReport", "grad_check",
    "AuditRecord", "EvaluationReport", "PredictionDetail", "UnlabeledSplitError",
    "calibrate_on_split", "evaluate_split", "predict_csv", "predict_sample",
    "ManifestError", "Sample", "read_manifest", "split_samples", "write_manifest",
    "CalibrationResult", "apply_threshold", "calibrate_threshold", "f1_scores",
    "BlendConfig", "ForwardResult", "ModelConfig", "ModelParams",
    "attention_pool", "blend", "conflict_features", "forward",
    "OptimState", "adamw_step", "cosine_lr",
    "SynthConfig", "generate_dataset", "generate_samples",
    "EpochStats", "TrainConfig", "TrainResult", "TrainingDivergedError",
    "history_to_jsonl", "joint_loss", "smooth_label", "train",
    "__version__",
]
