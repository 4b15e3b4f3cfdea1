"""Seeded temporal window sampling.

Window starts are drawn from a per-sample RNG derived from the job seed and
the sample id, so the same spec and seed always reproduce the same start
indices regardless of processing order or which other samples were skipped.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np


def sample_rng(seed: int, sample_id: str) -> np.random.Generator:
    digest = hashlib.sha256(sample_id.encode("utf-8")).digest()[:16]
    words = struct.unpack("<4I", digest)
    return np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFF, *words]))


def ensure_min_frames(frames: np.ndarray, window_frames: int) -> np.ndarray:
    """Repeat the last frame until at least one full window fits."""
    deficit = window_frames - frames.shape[0]
    if deficit <= 0:
        return frames
    tail = np.repeat(frames[-1:], deficit, axis=0)
    return np.concatenate([frames, tail], axis=0)


def choose_starts(n_frames: int, window_frames: int, k: int,
                  rng: np.random.Generator) -> list[int]:
    """K independent contiguous-window start indices in [0, n_frames - T]."""
    if k < 1:
        raise ValueError(f"window count must be >= 1, got {k}")
    if n_frames < window_frames:
        raise ValueError(f"{n_frames} frames cannot fit a {window_frames}-frame window")
    limit = n_frames - window_frames + 1
    return [int(rng.integers(0, limit)) for _ in range(k)]


def slice_windows(frames: np.ndarray, starts: list[int],
                  window_frames: int) -> list[np.ndarray]:
    return [frames[s:s + window_frames] for s in starts]
