"""Embedding file format, manifest parsing, and batch assembly."""

import json
import struct

import numpy as np
import pytest

from conflictfusion.batching import DataError, make_batch
from conflictfusion.embeddings import (EmbeddingFormatError, EmbeddingSequence,
                                       read_embedding, write_embedding)
from conflictfusion.manifest import (ManifestError, Sample, read_manifest,
                                     split_samples, write_manifest)


def seq(tokens, valid=None):
    tokens = np.asarray(tokens, dtype=np.float32)
    return EmbeddingSequence(tokens=tokens, valid_count=valid or tokens.shape[0])


# ------------------------------------------------------------- embeddings

def test_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    original = EmbeddingSequence(tokens=rng.standard_normal((7, 5)).astype(np.float32),
                                 valid_count=4)
    path = tmp_path / "x.caah"
    write_embedding(path, original)
    loaded = read_embedding(path)
    assert loaded.valid_count == 4
    np.testing.assert_array_equal(loaded.tokens, original.tokens)
    assert loaded.tokens.dtype == np.float32


def test_minimal_file_is_24_bytes(tmp_path):
    # header: magic 4 + version 2 + reserved 2 + L 4 + D 4 + valid 4 = 20,
    # payload: 1 float32 = 4 -> 24 bytes total
    path = tmp_path / "one.caah"
    write_embedding(path, seq([[0.5]]))
    blob = path.read_bytes()
    assert len(blob) == 24
    assert blob[:4] == b"CAAH"
    version, reserved, length, dim, valid = struct.unpack("<HHIII", blob[4:20])
    assert (version, reserved, length, dim, valid) == (1, 0, 1, 1, 1)
    assert struct.unpack("<f", blob[20:])[0] == 0.5


def test_nonfinite_tokens_refused():
    bad = np.array([[1.0, np.nan]], dtype=np.float32)
    with pytest.raises(ValueError):
        EmbeddingSequence(tokens=bad, valid_count=1)


def test_valid_count_bounds():
    with pytest.raises(ValueError):
        EmbeddingSequence(tokens=np.zeros((3, 2), dtype=np.float32), valid_count=0)
    with pytest.raises(ValueError):
        EmbeddingSequence(tokens=np.zeros((3, 2), dtype=np.float32), valid_count=4)


def test_read_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.caah"
    write_embedding(path, seq([[1.0]]))
    blob = bytearray(path.read_bytes())
    blob[:4] = b"NOPE"
    path.write_bytes(bytes(blob))
    with pytest.raises(EmbeddingFormatError, match="magic"):
        read_embedding(path)


def test_read_rejects_wrong_version(tmp_path):
    path = tmp_path / "v9.caah"
    write_embedding(path, seq([[1.0]]))
    blob = bytearray(path.read_bytes())
    blob[4:6] = struct.pack("<H", 9)
    path.write_bytes(bytes(blob))
    with pytest.raises(EmbeddingFormatError, match="version"):
        read_embedding(path)


def test_read_rejects_truncation(tmp_path):
    path = tmp_path / "short.caah"
    write_embedding(path, seq(np.ones((3, 4))))
    blob = path.read_bytes()
    path.write_bytes(blob[:-5])
    with pytest.raises(EmbeddingFormatError):
        read_embedding(path)


# --------------------------------------------------------------- manifest

def write_caah_tree(tmp_path, entries):
    """entries: list of (id, split, label, n_windows). Creates tiny embedding
    files and a manifest referencing them with relative paths."""
    (tmp_path / "emb").mkdir(exist_ok=True)
    rng = np.random.default_rng(1)
    lines = []
    for sid, split, label, n_win in entries:
        paths = {"video": [], "audio": f"emb/{sid}.a.caah", "text": f"emb/{sid}.t.caah"}
        for w in range(n_win):
            p = f"emb/{sid}.v{w}.caah"
            write_embedding(tmp_path / p, seq(rng.standard_normal((4, 3))))
            paths["video"].append(p)
        write_embedding(tmp_path / paths["audio"], seq(rng.standard_normal((5, 3))))
        write_embedding(tmp_path / paths["text"], seq(rng.standard_normal((6, 3))))
        lines.append({"id": sid, "split": split, "label": label, **paths})
    manifest = tmp_path / "manifest.jsonl"
    write_manifest(manifest, lines)
    return manifest


def test_read_manifest_order_preserved(tmp_path):
    manifest = write_caah_tree(tmp_path, [
        ("a", "train", 0, 2), ("b", "val", 1, 1), ("c", "test", 0, 3)])
    samples = read_manifest(manifest)
    assert [s.id for s in samples] == ["a", "b", "c"]
    assert samples[0].n_windows == 2
    assert samples[2].text_seq().dim == 3
    assert len(split_samples(samples, "val")) == 1


def test_unknown_split_names_line(tmp_path):
    manifest = write_caah_tree(tmp_path, [("a", "train", 0, 1)])
    lines = manifest.read_text().splitlines()
    bad = json.loads(lines[0])
    bad["split"] = "validation"
    manifest.write_text(lines[0] + "\n" + json.dumps(bad) + "\n")
    with pytest.raises(ManifestError, match="line 2"):
        read_manifest(manifest)


def test_null_label_in_labelled_split_rejected(tmp_path):
    manifest = write_caah_tree(tmp_path, [("a", "train", 0, 1)])
    row = json.loads(manifest.read_text())
    row["label"] = None
    manifest.write_text(json.dumps(row) + "\n")
    with pytest.raises(ManifestError, match="line 1"):
        read_manifest(manifest)


def test_label_on_unlabeled_split_rejected(tmp_path):
    manifest = write_caah_tree(tmp_path, [("a", "test_unlabeled", None, 1)])
    row = json.loads(manifest.read_text())
    row["label"] = 1
    manifest.write_text(json.dumps(row) + "\n")
    with pytest.raises(ManifestError, match="line 1"):
        read_manifest(manifest)


def test_empty_video_array_rejected(tmp_path):
    manifest = write_caah_tree(tmp_path, [("a", "train", 1, 1)])
    row = json.loads(manifest.read_text())
    row["video"] = []
    manifest.write_text(json.dumps(row) + "\n")
    with pytest.raises(ManifestError, match="line 1"):
        read_manifest(manifest)


def test_missing_and_unknown_fields_rejected(tmp_path):
    manifest = write_caah_tree(tmp_path, [("a", "train", 1, 1)])
    row = json.loads(manifest.read_text())
    del row["audio"]
    manifest.write_text(json.dumps(row) + "\n")
    with pytest.raises(ManifestError, match="audio"):
        read_manifest(manifest)
    row = json.loads(write_caah_tree(tmp_path, [("a", "train", 1, 1)]).read_text())
    row["extra"] = 1
    manifest.write_text(json.dumps(row) + "\n")
    with pytest.raises(ManifestError, match="extra"):
        read_manifest(manifest)


def test_invalid_json_names_line(tmp_path):
    manifest = write_caah_tree(tmp_path, [("a", "train", 0, 1)])
    manifest.write_text(manifest.read_text() + "{not json\n")
    with pytest.raises(ManifestError, match="line 2"):
        read_manifest(manifest)


def test_lazy_loading_caches(tmp_path):
    manifest = write_caah_tree(tmp_path, [("a", "train", 0, 1)])
    sample = read_manifest(manifest)[0]
    first = sample.text_seq()
    assert sample.text_seq() is first


# --------------------------------------------------------------- batching

def sample_from_seqs(sid, video, audio, text, label=0):
    return Sample(id=sid, split="train", label=label, video=video, audio=audio, text=text)


def test_padding_and_masks():
    # audio valid counts 5 and 3 -> padded to 5, masks [1]*5 and [1,1,1,0,0]
    rng = np.random.default_rng(0)
    s1 = sample_from_seqs("x", [seq(rng.standard_normal((4, 2)))],
                          seq(rng.standard_normal((5, 2))),
                          seq(rng.standard_normal((2, 2))))
    s2 = sample_from_seqs("y", [seq(rng.standard_normal((3, 2)))],
                          seq(rng.standard_normal((6, 2)), valid=3),
                          seq(rng.standard_normal((2, 2))))
    batch = make_batch([s1, s2], [0, 0])
    assert batch.audio.shape == (2, 5, 2)
    np.testing.assert_array_equal(batch.audio_mask,
                                  [[1, 1, 1, 1, 1], [1, 1, 1, 0, 0]])
    assert (batch.audio[1, 3:] == 0).all()
    np.testing.assert_array_equal(batch.labels, [0.0, 0.0])


def test_single_sample_no_padding():
    rng = np.random.default_rng(4)
    s = sample_from_seqs("solo", [seq(rng.standard_normal((3, 4)))],
                         seq(rng.standard_normal((2, 4))),
                         seq(rng.standard_normal((5, 4))))
    batch = make_batch([s], [0])
    assert batch.video.shape == (1, 3, 4)
    assert batch.video_mask.all()
    assert batch.size == 1 and batch.dim == 4


def test_mixed_dims_rejected():
    s1 = sample_from_seqs("a", [seq(np.zeros((2, 3)))], seq(np.zeros((2, 3))),
                          seq(np.zeros((2, 3))))
    s2 = sample_from_seqs("b", [seq(np.zeros((2, 4)))], seq(np.zeros((2, 4))),
                          seq(np.zeros((2, 4))))
    with pytest.raises(DataError):
        make_batch([s1, s2], [0, 0])


def test_window_index_out_of_range():
    s = sample_from_seqs("a", [seq(np.zeros((2, 3)))], seq(np.zeros((2, 3))),
                         seq(np.zeros((2, 3))))
    with pytest.raises(DataError):
        make_batch([s], [1])


def test_unlabeled_batch_has_no_labels():
    s = Sample(id="u", split="test_unlabeled", label=None,
               video=[seq(np.zeros((2, 3)))], audio=seq(np.zeros((2, 3))),
               text=seq(np.zeros((2, 3))))
    batch = make_batch([s], [0])
    assert batch.labels is None
    assert list(batch.ids) == ["u"]
