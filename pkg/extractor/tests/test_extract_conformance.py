"""End-to-end conformance: extracted datasets must be consumable, unchanged,
by the classifier package — its strict reader, its manifest parser, and its
train/evaluate CLI."""
import json
import logging
import shutil
import subprocess

import numpy as np
import pytest
from conflictfusion.embeddings import read_embedding
from conflictfusion.manifest import read_manifest

from caahextract import ExtractionSpec, SpecError, extract, read_input_manifest


@pytest.mark.criterion("extractor conformance: strict reader, 768-dim shapes, end-to-end evaluate")
def test_extractor_conformance(dataset, clips, tmp_path):
    out = dataset["out"]
    report = dataset["report"]

    # The classifier's strict manifest parser accepts the output unchanged,
    # in deterministic id order.
    samples = read_manifest(out / "manifest.jsonl")
    assert [s.id for s in samples] == ["clip-a", "clip-b", "clip-c"]
    assert not report.skipped

    # Every embedding file passes the strict reader with (L, 768) tokens.
    for sample in samples:
        paths = list(sample.video) + [sample.audio, sample.text]
        assert len(sample.video) == 5  # K=5 windows, e.g. 75 frames -> 5 files
        for path in paths:
            seq = read_embedding(path)
            assert seq.dim == 768
            assert seq.length >= 1
            assert seq.valid_count == seq.length

    by_id = {r.id: r for r in report.samples}
    # 1 s of 16 kHz audio -> the frontend's published ~49 tokens/s
    assert by_id["clip-a"].audio_tokens == 49
    assert all(n == 1568 for r in report.samples for n in r.video_tokens)
    # 7 decoded frames < one 16-frame window: last-frame padding leaves a
    # single legal start position
    assert by_id["clip-c"].n_frames == 7
    assert by_id["clip-c"].window_starts == [0, 0, 0, 0, 0]
    assert by_id["clip-a"].n_frames == 75
    assert all(0 <= s <= 59 for s in by_id["clip-a"].window_starts)
    # transcript edge policies, flagged in the extraction report
    assert by_id["clip-b"].text_tokens == 512 and by_id["clip-b"].transcript_truncated
    assert by_id["clip-c"].text_tokens == 1 and by_id["clip-c"].transcript_empty

    # The classifier pipeline runs end-to-end on the extracted dataset.
    cli = shutil.which("conflictfusion")
    assert cli, "conflictfusion CLI must be installed"
    run_dir = tmp_path / "run"
    train = subprocess.run(
        [cli, "train", "--manifest", str(out / "manifest.jsonl"),
         "--out", str(run_dir), "--dim", "16", "--head-hidden", "8",
         "--max-epochs", "1", "--patience", "1", "--lr", "1e-4",
         "--batch-size", "1", "--accum-steps", "1", "--pos-weight", "1.0"],
        capture_output=True, text=True)
    assert train.returncode == 0, train.stderr
    evaluate = subprocess.run(
        [cli, "evaluate", "--manifest", str(out / "manifest.jsonl"),
         "--split", "test", "--checkpoint", str(run_dir / "checkpoint.cahc"),
         "--threshold", "0.5", "--out", str(tmp_path / "report.json")],
        capture_output=True, text=True)
    assert evaluate.returncode == 0, evaluate.stderr
    scored = json.loads((tmp_path / "report.json").read_text())
    assert 0.0 <= scored["macro_f1"] <= 1.0
    assert len(scored["samples"]) == 1 and scored["samples"][0]["id"] == "clip-c"


def test_extraction_deterministic(dataset, clips, tmp_path):
    spec = ExtractionSpec(manifest=clips["manifest"], out_dir=tmp_path / "again",
                          windows=5, window_frames=16, seed=0, backend="stub")
    report = extract(spec)

    first_manifest = (dataset["out"] / "manifest.jsonl").read_bytes()
    assert (tmp_path / "again" / "manifest.jsonl").read_bytes() == first_manifest

    by_id = {r.id: r for r in dataset["report"].samples}
    for sample in report.samples:
        assert sample.window_starts == by_id[sample.id].window_starts

    # the stub backend is a pure function of the inputs: files match bit-exactly
    for entry in read_input_manifest(clips["manifest"]):
        for rel in [f"{entry.id}_video0.caah", f"{entry.id}_audio.caah",
                    f"{entry.id}_text.caah"]:
            ours = (tmp_path / "again" / "embeddings" / rel).read_bytes()
            theirs = (dataset["out"] / "embeddings" / rel).read_bytes()
            assert ours == theirs


def test_different_seed_moves_windows(clips, dataset, tmp_path):
    spec = ExtractionSpec(manifest=clips["manifest"], out_dir=tmp_path / "seed1",
                          windows=5, window_frames=16, seed=1, backend="stub")
    report = extract(spec)
    starts0 = {r.id: r.window_starts for r in dataset["report"].samples}
    starts1 = {r.id: r.window_starts for r in report.samples}
    # clip-a has 60 legal starts; five draws colliding across seeds is ~impossible
    assert starts1["clip-a"] != starts0["clip-a"]
    # clip-c has exactly one legal start, so it must not move
    assert starts1["clip-c"] == [0, 0, 0, 0, 0]


def test_undecodable_sample_skipped_with_log(clips, tmp_path, caplog):
    media = clips["media"]
    rows = []
    for line in clips["manifest"].read_text().splitlines():
        row = json.loads(line)
        # the copy lives in tmp_path, so point at the media absolutely
        row["video"] = str(clips["root"] / row["video"])
        row["audio"] = str(clips["root"] / row["audio"])
        rows.append(json.dumps(row))
    rows.append(json.dumps({"id": "clip-broken", "video": str(media / "missing.mp4"),
                            "audio": str(media / "clip-a.wav"), "transcript": "x",
                            "split": "test", "label": 0}))
    manifest = tmp_path / "with_broken.jsonl"
    manifest.write_text("".join(r + "\n" for r in rows), encoding="utf-8")

    spec = ExtractionSpec(manifest=manifest, out_dir=tmp_path / "data",
                          windows=2, window_frames=16, seed=0, backend="stub")
    with caplog.at_level(logging.WARNING, logger="caahextract"):
        report = extract(spec)

    assert [s["id"] for s in report.skipped] == ["clip-broken"]
    assert "no such" in report.skipped[0]["reason"]
    assert any("clip-broken" in rec.message for rec in caplog.records)
    samples = read_manifest(tmp_path / "data" / "manifest.jsonl")
    assert [s.id for s in samples] == ["clip-a", "clip-b", "clip-c"]


def test_input_manifest_validation(tmp_path):
    manifest = tmp_path / "in.jsonl"

    def check(row, message):
        manifest.write_text(json.dumps(row) + "\n", encoding="utf-8")
        with pytest.raises(SpecError, match=message):
            read_input_manifest(manifest)

    base = {"id": "a", "video": "v.mp4", "audio": "a.wav", "transcript": "t"}
    check({**base, "extra": 1}, "unknown fields")
    check({k: v for k, v in base.items() if k != "audio"}, "missing field")
    check({**base, "id": "bad id!"}, "must match")
    check({**base, "split": "dev"}, "unknown split")
    check({**base, "split": "train"}, "requires label")
    check({**base, "split": "test_unlabeled", "label": 1}, "label null")
    check({**base, "transcript": 7}, "must be a string")

    manifest.write_text(json.dumps(base) + "\n" + json.dumps(base) + "\n",
                        encoding="utf-8")
    with pytest.raises(SpecError, match="duplicate id"):
        read_input_manifest(manifest)

    with pytest.raises(SpecError, match="not found"):
        read_input_manifest(tmp_path / "absent.jsonl")


def test_spec_validation(tmp_path):
    manifest = tmp_path / "in.jsonl"
    manifest.write_text("{}\n")
    with pytest.raises(SpecError, match="windows"):
        ExtractionSpec(manifest=manifest, out_dir=tmp_path, windows=0)
    with pytest.raises(SpecError, match="backend"):
        ExtractionSpec(manifest=manifest, out_dir=tmp_path, backend="magic")
