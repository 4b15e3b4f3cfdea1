"""Encoder backends: pretrained transformers or a deterministic offline stub.

Both backends share one contract: video takes an ImageNet-normalised
(T, 3, 224, 224) float32 window and returns (L_v, 768) float32 tokens;
audio takes 16 kHz mono float32 and returns (L_a, 768); text takes the
transcript string and returns ((L_t, 768), truncated, empty). Empty
transcripts yield the leading token of the encoder's minimal input — a
single-token sequence — and are flagged so downstream audits can see them.

The stub backend exists so the pipeline is testable end-to-end on machines
without model weights: it is a pure function of the input bytes with the
same token-count behaviour as the pretrained trio (tube patches for video,
20 ms stride for audio, per-word pieces for text), not a model.
"""

from __future__ import annotations

import hashlib

import numpy as np

DIM = 768
VIDEO_FRAMES = 16
VIDEO_SIZE = 224
_PATCH = 16
_TUBE = 2
_GRID = VIDEO_SIZE // _PATCH                       # 14
VIDEO_TOKENS = (VIDEO_FRAMES // _TUBE) * _GRID * _GRID  # 1568
_AUDIO_WINDOW = 400                                # 25 ms at 16 kHz
_AUDIO_STRIDE = 320                                # 20 ms -> ~49 tokens/s
TEXT_CONTEXT = 512                                 # includes BOS/EOS
_TEXT_WORDS = TEXT_CONTEXT - 2

DEFAULT_VIDEO_MODEL = "MCG-NJU/videomae-base"
DEFAULT_AUDIO_MODEL = "facebook/hubert-base-ls960"
DEFAULT_TEXT_MODEL = "roberta-base"


class BackendError(RuntimeError):
    """Raised when an encoder backend cannot run."""


def audio_token_count(n_samples: int) -> int:
    """Token count of the 20 ms-stride frontend; short clips give one token."""
    if n_samples < _AUDIO_WINDOW:
        return 1
    return 1 + (n_samples - _AUDIO_WINDOW) // _AUDIO_STRIDE


class StubEncoders:
    """Deterministic content-dependent embeddings with realistic shapes."""

    def __init__(self):
        rng = np.random.default_rng(1486)
        self._w_video = rng.standard_normal((2, DIM)).astype(np.float32)
        self._pos_video = (0.05 * rng.standard_normal((VIDEO_TOKENS, DIM))).astype(np.float32)
        self._w_audio = rng.standard_normal((4, DIM)).astype(np.float32)
        self._ramp_audio = rng.standard_normal(DIM).astype(np.float32)
        self._bos = rng.standard_normal(DIM).astype(np.float32)
        self._eos = rng.standard_normal(DIM).astype(np.float32)
        self._pos_text = rng.standard_normal(DIM).astype(np.float32)
        self._word_cache: dict[str, np.ndarray] = {}

    def video(self, window: np.ndarray) -> np.ndarray:
        if window.shape != (VIDEO_FRAMES, 3, VIDEO_SIZE, VIDEO_SIZE):
            raise BackendError(f"video window must be {(VIDEO_FRAMES, 3, VIDEO_SIZE, VIDEO_SIZE)}, "
                               f"got {window.shape}")
        # token (t, gy, gx) summarises a 2-frame x 16x16-pixel tube, the same
        # patch layout the pretrained video encoder tokenises
        tubes = window.reshape(VIDEO_FRAMES // _TUBE, _TUBE, 3,
                               _GRID, _PATCH, _GRID, _PATCH)
        means = tubes.mean(axis=(1, 2, 4, 6)).reshape(-1)
        stds = tubes.std(axis=(1, 2, 4, 6)).reshape(-1)
        feats = np.stack([means, stds], axis=1).astype(np.float32)
        return np.tanh(feats @ self._w_video + self._pos_video).astype(np.float32)

    def audio(self, waveform: np.ndarray) -> np.ndarray:
        x = np.asarray(waveform, dtype=np.float32).reshape(-1)
        if x.size == 0:
            raise BackendError("audio waveform is empty")
        if x.size < _AUDIO_WINDOW:
            x = np.pad(x, (0, _AUDIO_WINDOW - x.size))
        frames = np.lib.stride_tricks.sliding_window_view(x, _AUDIO_WINDOW)[::_AUDIO_STRIDE]
        zcr = np.abs(np.diff(np.signbit(frames).astype(np.float32), axis=1)).mean(axis=1)
        feats = np.stack([frames.mean(axis=1), frames.std(axis=1),
                          np.abs(frames).mean(axis=1), zcr], axis=1)
        ramp = np.arange(len(frames), dtype=np.float32) / max(len(frames) - 1, 1)
        tokens = np.tanh(feats @ self._w_audio + np.outer(ramp, self._ramp_audio))
        return tokens.astype(np.float32)

    def _word_vector(self, word: str) -> np.ndarray:
        vec = self._word_cache.get(word)
        if vec is None:
            seed = int.from_bytes(hashlib.sha256(word.encode("utf-8")).digest()[:8], "little")
            vec = (0.5 * np.random.default_rng(seed).standard_normal(DIM)).astype(np.float32)
            self._word_cache[word] = vec
        return vec

    def text(self, transcript: str) -> tuple[np.ndarray, bool, bool]:
        words = transcript.split()
        truncated = len(words) > _TEXT_WORDS
        words = words[:_TEXT_WORDS]
        if not words:
            return self._bos[None, :].copy(), False, True
        rows = [self._bos]
        for i, word in enumerate(words):
            scale = (i + 1) / len(words)
            rows.append(self._word_vector(word) + scale * 0.1 * self._pos_text)
        rows.append(self._eos)
        return np.stack(rows).astype(np.float32), truncated, False


class PretrainedEncoders:
    """The published encoder trio via transformers; loads lazily on first use.

    Needs the weights locally cached or a reachable model hub; otherwise
    every call raises BackendError explaining how to fall back to the stub.
    """

    def __init__(self, video_model: str = DEFAULT_VIDEO_MODEL,
                 audio_model: str = DEFAULT_AUDIO_MODEL,
                 text_model: str = DEFAULT_TEXT_MODEL):
        self._names = (video_model, audio_model, text_model)
        self._models = None

    def _load(self):
        if self._models is not None:
            return self._models
        try:
            import torch
            from transformers import AutoModel, AutoTokenizer
            video = AutoModel.from_pretrained(self._names[0])
            audio = AutoModel.from_pretrained(self._names[1])
            text = AutoModel.from_pretrained(self._names[2])
            tokenizer = AutoTokenizer.from_pretrained(self._names[2])
        except Exception as exc:  # noqa: BLE001 - report any load failure uniformly
            raise BackendError(
                f"pretrained backend unavailable ({exc}); pass backend='stub' "
                "for an offline run") from None
        for model in (video, audio, text):
            model.eval()
        self._models = (torch, video, audio, text, tokenizer)
        return self._models

    def video(self, window: np.ndarray) -> np.ndarray:
        torch, video, _, _, _ = self._load()
        with torch.no_grad():
            out = video(pixel_values=torch.from_numpy(window[None]))
        return out.last_hidden_state[0].numpy().astype(np.float32)

    def audio(self, waveform: np.ndarray) -> np.ndarray:
        torch, _, audio, _, _ = self._load()
        with torch.no_grad():
            out = audio(input_values=torch.from_numpy(waveform[None]))
        return out.last_hidden_state[0].numpy().astype(np.float32)

    def text(self, transcript: str) -> tuple[np.ndarray, bool, bool]:
        torch, _, _, text, tokenizer = self._load()
        ids = tokenizer(transcript, truncation=True, max_length=TEXT_CONTEXT,
                        return_tensors="pt")
        full_len = len(tokenizer(transcript)["input_ids"])
        truncated = full_len > TEXT_CONTEXT
        empty = not transcript.split()
        with torch.no_grad():
            out = text(**ids)
        tokens = out.last_hidden_state[0].numpy().astype(np.float32)
        if empty:
            tokens = tokens[:1]  # leading token of the minimal input
        return tokens, truncated, empty


_BACKENDS = {"stub": StubEncoders, "pretrained": PretrainedEncoders}


def get_encoders(name: str):
    try:
        factory = _BACKENDS[name]
    except KeyError:
        raise BackendError(f"unknown backend {name!r} (expected one of {sorted(_BACKENDS)})") from None
    return factory()
