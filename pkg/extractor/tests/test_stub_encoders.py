"""The offline stub backend: shape contracts, determinism, content sensitivity."""
import numpy as np
import pytest

from caahextract.encoders import (
    BackendError,
    StubEncoders,
    audio_token_count,
    get_encoders,
)


@pytest.fixture(scope="module")
def enc():
    return StubEncoders()


def _window(seed=0):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((16, 3, 224, 224)).astype(np.float32)


def test_video_shape_and_dtype(enc):
    tokens = enc.video(_window())
    assert tokens.shape == (1568, 768)  # 8 tube pairs x 14x14 patches
    assert tokens.dtype == np.float32
    assert np.isfinite(tokens).all()


def test_video_rejects_wrong_shape(enc):
    with pytest.raises(BackendError, match="window"):
        enc.video(np.zeros((8, 3, 224, 224), dtype=np.float32))


def test_video_deterministic_across_instances():
    a = StubEncoders().video(_window(3))
    b = StubEncoders().video(_window(3))
    assert np.array_equal(a, b)


def test_video_content_sensitive(enc):
    assert not np.array_equal(enc.video(_window(0)), enc.video(_window(1)))


def test_audio_published_frame_rate(enc):
    # one second of 16 kHz audio -> 49 tokens at the 25 ms window / 20 ms
    # stride frontend, the published ~49 tokens/s figure
    tone = np.sin(2 * np.pi * 440 * np.arange(16000) / 16000.0).astype(np.float32)
    tokens = enc.audio(tone)
    assert tokens.shape == (49, 768)


@pytest.mark.parametrize("n", [100, 400, 719, 720, 8000, 16000, 40000])
def test_audio_token_count_matches_formula(enc, n):
    tokens = enc.audio(np.random.default_rng(n).standard_normal(n).astype(np.float32))
    assert tokens.shape == (audio_token_count(n), 768)


def test_audio_short_input_single_token(enc):
    tokens = enc.audio(np.ones(50, dtype=np.float32))
    assert tokens.shape == (1, 768)


def test_audio_rejects_empty(enc):
    with pytest.raises(BackendError, match="empty"):
        enc.audio(np.zeros(0, dtype=np.float32))


def test_text_token_count(enc):
    tokens, truncated, empty = enc.text("three small words")
    assert tokens.shape == (5, 768)  # BOS + 3 + EOS
    assert not truncated and not empty


def test_text_head_truncation(enc):
    tokens, truncated, empty = enc.text(" ".join(f"w{i}" for i in range(600)))
    assert tokens.shape == (512, 768)  # BOS + 510 kept words + EOS
    assert truncated and not empty


def test_text_empty_single_token_flagged(enc):
    tokens, truncated, empty = enc.text("   ")
    assert tokens.shape == (1, 768)
    assert empty and not truncated


def test_text_truncation_keeps_head(enc):
    long = " ".join(f"w{i}" for i in range(600))
    head = " ".join(f"w{i}" for i in range(510))
    full_tokens, _, _ = enc.text(long)
    head_tokens, _, _ = enc.text(head)
    assert np.array_equal(full_tokens, head_tokens)


def test_text_deterministic_across_instances():
    a = StubEncoders().text("hello hesitant world")[0]
    b = StubEncoders().text("hello hesitant world")[0]
    assert np.array_equal(a, b)


def test_get_encoders_registry():
    assert isinstance(get_encoders("stub"), StubEncoders)
    with pytest.raises(BackendError, match="unknown backend"):
        get_encoders("nope")
