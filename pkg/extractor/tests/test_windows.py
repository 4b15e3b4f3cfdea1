"""Seeded window sampling: determinism, bounds, and the short-video policy."""
import numpy as np
import pytest

from caahextract.windows import (
    choose_starts,
    ensure_min_frames,
    sample_rng,
    slice_windows,
)


def test_sample_rng_deterministic_and_id_sensitive():
    a1 = sample_rng(7, "clip-a").integers(0, 1 << 30, size=8)
    a2 = sample_rng(7, "clip-a").integers(0, 1 << 30, size=8)
    b = sample_rng(7, "clip-b").integers(0, 1 << 30, size=8)
    other_seed = sample_rng(8, "clip-a").integers(0, 1 << 30, size=8)
    assert np.array_equal(a1, a2)
    assert not np.array_equal(a1, b)
    assert not np.array_equal(a1, other_seed)


def test_ensure_min_frames_repeats_last():
    frames = np.arange(3 * 2 * 2 * 3, dtype=np.uint8).reshape(3, 2, 2, 3)
    padded = ensure_min_frames(frames, 8)
    assert padded.shape[0] == 8
    assert np.array_equal(padded[:3], frames)
    for i in range(3, 8):
        assert np.array_equal(padded[i], frames[-1])


def test_ensure_min_frames_noop_when_long_enough():
    frames = np.zeros((16, 2, 2, 3), dtype=np.uint8)
    assert ensure_min_frames(frames, 16) is frames


def test_choose_starts_bounds_and_count():
    rng = sample_rng(0, "x")
    starts = choose_starts(75, 16, 500, rng)
    assert len(starts) == 500
    assert all(0 <= s <= 59 for s in starts)
    assert min(starts) == 0 and max(starts) == 59  # whole range reachable


def test_choose_starts_single_position():
    starts = choose_starts(16, 16, 5, sample_rng(0, "x"))
    assert starts == [0, 0, 0, 0, 0]


def test_choose_starts_validation():
    with pytest.raises(ValueError, match=">= 1"):
        choose_starts(20, 16, 0, sample_rng(0, "x"))
    with pytest.raises(ValueError, match="cannot fit"):
        choose_starts(10, 16, 1, sample_rng(0, "x"))


def test_slice_windows_contiguous():
    frames = np.arange(20)[:, None, None, None] * np.ones((1, 2, 2, 3), dtype=np.int64)
    windows = slice_windows(frames, [0, 4], 16)
    assert windows[0].shape[0] == 16
    assert windows[1][0, 0, 0, 0] == 4
    assert windows[1][15, 0, 0, 0] == 19
