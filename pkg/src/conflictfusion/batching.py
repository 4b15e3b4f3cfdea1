"""Assemble padded per-modality batches with validity masks."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .embeddings import EmbeddingSequence
from .manifest import Sample


class DataError(ValueError):
    """Raised when samples cannot form a consistent batch."""


@dataclass
class Batch:
    """Zero-padded modality tensors plus boolean masks marking real tokens."""

    video: np.ndarray       # [B, Lv, D]
    video_mask: np.ndarray  # [B, Lv] bool
    audio: np.ndarray
    audio_mask: np.ndarray
    text: np.ndarray
    text_mask: np.ndarray
    labels: np.ndarray | None  # [B] float, None when any sample is unlabeled
    ids: list[str]

    @property
    def size(self) -> int:
        return self.video.shape[0]

    @property
    def dim(self) -> int:
        return self.video.shape[2]


def _stack(seqs: list[EmbeddingSequence], dim: int, dtype) -> tuple[np.ndarray, np.ndarray]:
    max_len = max(s.valid_count for s in seqs)
    out = np.zeros((len(seqs), max_len, dim), dtype=dtype)
    mask = np.zeros((len(seqs), max_len), dtype=bool)
    for i, s in enumerate(seqs):
        n = s.valid_count
        out[i, :n] = s.tokens[:n]
        mask[i, :n] = True
    return out, mask


def make_batch(samples: Sequence[Sample], window_choice: Sequence[int], dtype=np.float32) -> Batch:
    """Pad each modality to the batch max valid length and build its mask.

    `window_choice[i]` selects which pre-extracted video window sample i
    contributes. Labels are collected only if every sample carries one.
    """
    if len(samples) == 0:
        raise DataError("cannot batch zero samples")
    if len(window_choice) != len(samples):
        raise DataError(f"window_choice has {len(window_choice)} entries for {len(samples)} samples")

    videos, audios, texts = [], [], []
    for s, w in zip(samples, window_choice):
        windows = s.video_windows()
        if not 0 <= w < len(windows):
            raise DataError(f"sample {s.id!r}: window index {w} out of range [0, {len(windows)})")
        videos.append(windows[w])
        audios.append(s.audio_seq())
        texts.append(s.text_seq())

    dims = {seq.dim for seq in videos + audios + texts}
    if len(dims) != 1:
        raise DataError(f"mixed embedding dims in batch: {sorted(dims)}")
    dim = dims.pop()

    video, video_mask = _stack(videos, dim, dtype)
    audio, audio_mask = _stack(audios, dim, dtype)
    text, text_mask = _stack(texts, dim, dtype)

    labels = None
    if all(s.label is not None for s in samples):
        labels = np.array([s.label for s in samples], dtype=np.float64)
    return Batch(video, video_mask, audio, audio_mask, text, text_mask,
                 labels, [s.id for s in samples])
