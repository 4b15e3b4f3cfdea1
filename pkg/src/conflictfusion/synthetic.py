"""Synthetic conflict-task generator.

Both classes share identical per-modality marginals: every sample draws a
random sign r and puts its video token mean at r*c*u. Negatives put the
text mean at the same point, positives at the reflected point, so the label
is carried only by video-text agreement vs disagreement. Audio defaults to
pure noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embeddings import EmbeddingSequence, write_embedding
from .manifest import Sample, write_manifest


@dataclass(frozen=True)
class SynthConfig:
    n_per_class: int = 200
    dim: int = 64
    len_video: int = 48
    len_audio: int = 48
    len_text: int = 48
    windows: int = 3
    signal: float = 1.0          # c: token-mean magnitude along the hidden direction
    noise: float = 0.5           # sigma_n: i.i.d. Gaussian token noise
    seed: int = 0
    audio_signal: float = 0.0    # fraction of the video signal leaked into audio
    length_jitter: float = 0.25  # valid_count drawn uniformly from [ceil(L*(1-j)), L]

    def __post_init__(self):
        if self.n_per_class < 1 or self.windows < 1 or self.dim < 1:
            raise ValueError("counts must be >= 1")
        if min(self.len_video, self.len_audio, self.len_text) < 1:
            raise ValueError("sequence lengths must be >= 1")
        if self.signal <= 0.0:
            raise ValueError("signal magnitude must be > 0")
        if self.noise < 0.0:
            raise ValueError("noise std must be >= 0")
        if not 0.0 <= self.length_jitter < 1.0:
            raise ValueError("length_jitter must be in [0, 1)")


def split_counts(n_per_class: int) -> tuple[int, int, int]:
    """70/15/15 per class; train and val floor, test takes the remainder."""
    n_train = math.floor(0.70 * n_per_class)
    n_val = math.floor(0.15 * n_per_class)
    return n_train, n_val, n_per_class - n_train - n_val


def _draw_sequence(rng: np.random.Generator, mean: np.ndarray, length: int,
                   noise: float, jitter: float) -> EmbeddingSequence:
    lo = max(1, math.ceil(length * (1.0 - jitter)))
    valid = int(rng.integers(lo, length + 1))
    tokens = mean[None, :] + noise * rng.standard_normal((length, mean.shape[0]))
    return EmbeddingSequence(tokens=tokens.astype(np.float32), valid_count=valid)


def generate_samples(cfg: SynthConfig) -> list[Sample]:
    """Deterministic in-memory dataset; same draws the on-disk writer serialises."""
    rng = np.random.default_rng(cfg.seed)
    direction = rng.standard_normal(cfg.dim)
    direction /= np.linalg.norm(direction)

    n_train, n_val, _ = split_counts(cfg.n_per_class)
    samples = []
    for label in (0, 1):
        for i in range(cfg.n_per_class):
            r = 1.0 if rng.integers(0, 2) == 1 else -1.0
            base = r * cfg.signal * direction
            video = [
                _draw_sequence(rng, base, cfg.len_video, cfg.noise, cfg.length_jitter)
                for _ in range(cfg.windows)
            ]
            audio = _draw_sequence(rng, cfg.audio_signal * base, cfg.len_audio,
                                   cfg.noise, cfg.length_jitter)
            text_mean = -base if label == 1 else base
            text = _draw_sequence(rng, text_mean, cfg.len_text, cfg.noise, cfg.length_jitter)
            if i < n_train:
                split = "train"
            elif i < n_train + n_val:
                split = "val"
            else:
                split = "test"
            samples.append(Sample(
                id=f"syn-{label}-{i:05d}",
                split=split,
                label=label,
                video=video,
                audio=audio,
                text=text,
            ))
    return samples


def generate_dataset(cfg: SynthConfig, out_dir) -> Path:
    """Write embedding files plus manifest.jsonl under out_dir; returns the manifest path."""
    out_dir = Path(out_dir)
    emb_dir = out_dir / "embeddings"
    emb_dir.mkdir(parents=True, exist_ok=True)

    entries = []
    for sample in generate_samples(cfg):
        video_paths = []
        for w, seq in enumerate(sample.video):
            rel = f"embeddings/{sample.id}.v{w}.caah"
            write_embedding(out_dir / rel, seq)
            video_paths.append(rel)
        audio_rel = f"embeddings/{sample.id}.a.caah"
        write_embedding(out_dir / audio_rel, sample.audio)
        text_rel = f"embeddings/{sample.id}.t.caah"
        write_embedding(out_dir / text_rel, sample.text)
        entries.append({
            "id": sample.id,
            "split": sample.split,
            "label": sample.label,
            "video": video_paths,
            "audio": audio_rel,
            "text": text_rel,
        })
    manifest_path = out_dir / "manifest.jsonl"
    write_manifest(manifest_path, entries)
    return manifest_path
