"""The synthetic conflict task: the label must live in video-text
disagreement, never in any single modality's marginal distribution."""

import filecmp

import numpy as np
from sklearn.linear_model import LogisticRegression

from conflictfusion.synthetic import SynthConfig, generate_dataset, generate_samples, split_counts


def small_cfg(**kw):
    base = dict(n_per_class=20, dim=8, len_video=6, len_audio=6, len_text=6,
                windows=2, seed=0)
    base.update(kw)
    return SynthConfig(**base)


def test_split_counts_canonical():
    assert split_counts(100) == (70, 15, 15)
    assert split_counts(20) == (14, 3, 3)


def test_split_counts_odd_n_sum():
    for n in (1, 2, 3, 7, 13, 99, 101):
        tr, va, te = split_counts(n)
        assert tr + va + te == n
        assert tr == int(n * 0.7)
        assert va == int(n * 0.15)


def test_manifest_counts_and_balance(tmp_path):
    manifest = generate_dataset(SynthConfig(n_per_class=100, dim=4, len_video=3,
                                            len_audio=3, len_text=3, windows=1, seed=1),
                                tmp_path)
    lines = manifest.read_text().splitlines()
    assert len(lines) == 200
    import json
    rows = [json.loads(l) for l in lines]
    for split, expected in (("train", 70), ("val", 15), ("test", 15)):
        members = [r for r in rows if r["split"] == split]
        assert sum(r["label"] for r in members) == expected
        assert len(members) == 2 * expected


def test_regeneration_is_byte_identical(tmp_path):
    cfg = small_cfg(seed=42)
    m1 = generate_dataset(cfg, tmp_path / "a")
    m2 = generate_dataset(cfg, tmp_path / "b")
    assert m1.read_bytes() == m2.read_bytes()
    files1 = sorted((tmp_path / "a" / "embeddings").iterdir())
    files2 = sorted((tmp_path / "b" / "embeddings").iterdir())
    assert [f.name for f in files1] == [f.name for f in files2]
    for f1, f2 in zip(files1, files2):
        assert filecmp.cmp(f1, f2, shallow=False), f1.name


def test_different_seeds_differ(tmp_path):
    m1 = generate_dataset(small_cfg(seed=1), tmp_path / "a")
    m2 = generate_dataset(small_cfg(seed=2), tmp_path / "b")
    s1 = generate_samples(small_cfg(seed=1))
    s2 = generate_samples(small_cfg(seed=2))
    assert not np.array_equal(s1[0].text_seq().tokens, s2[0].text_seq().tokens)


def test_video_text_gap_by_class():
    # construction: ||mean(v) - mean(t)|| is ~2c for positives, ~noise for negatives
    cfg = SynthConfig(n_per_class=60, dim=32, len_video=48, len_audio=8, len_text=48,
                      windows=2, signal=1.0, noise=0.5, seed=5)
    samples = generate_samples(cfg)
    gaps = {0: [], 1: []}
    for s in samples:
        v = np.concatenate([w.valid_tokens for w in s.video_windows()]).mean(axis=0)
        t = s.text_seq().valid_tokens.mean(axis=0)
        gaps[s.label].append(np.linalg.norm(v - t))
    assert np.mean(gaps[1]) > 1.5  # ~2c = 2.0
    assert np.mean(gaps[0]) < 1.0  # noise floor
    assert np.mean(gaps[1]) > 2 * np.mean(gaps[0])


def test_text_probe_scores_chance():
    # a logistic probe on the text mean alone must sit at chance: the marginal
    # is the same mixture for both classes by construction
    cfg = SynthConfig(n_per_class=1000, dim=16, len_video=2, len_audio=2, len_text=8,
                      windows=1, signal=1.0, noise=0.5, seed=9)
    samples = generate_samples(cfg)
    X = np.stack([s.text_seq().valid_tokens.mean(axis=0) for s in samples])
    y = np.array([s.label for s in samples])
    half = len(samples) // 2
    rng = np.random.default_rng(0)
    order = rng.permutation(len(samples))
    probe = LogisticRegression(max_iter=1000).fit(X[order[:half]], y[order[:half]])
    acc = probe.score(X[order[half:]], y[order[half:]])
    assert abs(acc - 0.5) < 0.05


def test_audio_is_pure_noise_by_default():
    cfg = small_cfg(noise=0.5)
    samples = generate_samples(cfg)
    pooled = np.stack([s.audio_seq().valid_tokens.mean(axis=0) for s in samples])
    # zero-mean noise: the grand mean shrinks with n, far below the signal level
    assert np.linalg.norm(pooled.mean(axis=0)) < 0.3


def test_audio_signal_flag_leaks_video_signal():
    strong = SynthConfig(n_per_class=40, dim=8, len_video=16, len_audio=16, len_text=16,
                         windows=1, audio_signal=1.0, seed=3)
    samples = generate_samples(strong)
    gaps = {0: [], 1: []}
    for s in samples:
        v = s.video_windows()[0].valid_tokens.mean(axis=0)
        a = s.audio_seq().valid_tokens.mean(axis=0)
        gaps[s.label].append(np.linalg.norm(v - a))
    # audio copies the video mean in both classes: both gaps sit at the noise floor
    assert np.mean(gaps[0]) < 1.0 and np.mean(gaps[1]) < 1.0


def test_ids_unique_and_splits_class_balanced():
    samples = generate_samples(small_cfg())
    ids = [s.id for s in samples]
    assert len(set(ids)) == len(ids)
    for split in ("train", "val", "test"):
        members = [s for s in samples if s.split == split]
        assert sum(s.label for s in members) * 2 == len(members)
