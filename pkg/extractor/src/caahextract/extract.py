"""The extraction pipeline: raw media in, a CAAH embedding dataset out.

Per sample: K seeded contiguous 16-frame video windows (short videos repeat
their last frame to fill one window), one 16 kHz mono audio sequence, one
transcript sequence. Outputs land in <out_dir>/embeddings/ with a
manifest.jsonl the classifier's CLI accepts unchanged, plus an
extraction_report.json recording window starts, token counts, transcript
flags, and every skipped sample with its reason. Undecodable media skips
the sample with a logged warning; it is omitted from the manifest.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .encoders import get_encoders
from .formats import write_tokens
from .media import DecodeError, load_audio, load_video_frames, preprocess_window
from .spec import ExtractionSpec, read_input_manifest
from .windows import choose_starts, ensure_min_frames, sample_rng, slice_windows

logger = logging.getLogger("caahextract")

_MANIFEST_FIELDS = ("id", "split", "label", "video", "audio", "text")


@dataclass(frozen=True)
class SampleReport:
    id: str
    split: str
    n_frames: int                 # decoded frames, before last-frame padding
    window_starts: list[int]
    video_tokens: list[int]
    audio_tokens: int
    text_tokens: int
    transcript_truncated: bool
    transcript_empty: bool


@dataclass
class ExtractionReport:
    backend: str
    windows: int
    window_frames: int
    seed: int
    samples: list[SampleReport] = field(default_factory=list)
    skipped: list[dict] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps({
            "backend": self.backend,
            "windows": self.windows,
            "window_frames": self.window_frames,
            "seed": self.seed,
            "samples": [asdict(s) for s in self.samples],
            "skipped": self.skipped,
        }, indent=2)


def _extract_one(item, spec: ExtractionSpec, encoders, emb_dir: Path) -> tuple[dict, SampleReport]:
    frames = load_video_frames(item.video)
    waveform = load_audio(item.audio)

    n_frames = frames.shape[0]
    frames = ensure_min_frames(frames, spec.window_frames)
    rng = sample_rng(spec.seed, item.id)
    starts = choose_starts(frames.shape[0], spec.window_frames, spec.windows, rng)

    video_paths, video_tokens = [], []
    for j, window in enumerate(slice_windows(frames, starts, spec.window_frames)):
        pixels = preprocess_window(window, plain_frames=spec.plain_frames)
        tokens = encoders.video(pixels)
        rel = f"embeddings/{item.id}_video{j}.caah"
        write_tokens(emb_dir.parent / rel, tokens)
        video_paths.append(rel)
        video_tokens.append(tokens.shape[0])

    audio_tokens = encoders.audio(waveform)
    audio_rel = f"embeddings/{item.id}_audio.caah"
    write_tokens(emb_dir.parent / audio_rel, audio_tokens)

    text_tokens, truncated, empty = encoders.text(item.transcript)
    text_rel = f"embeddings/{item.id}_text.caah"
    write_tokens(emb_dir.parent / text_rel, text_tokens)

    entry = {"id": item.id, "split": item.split, "label": item.label,
             "video": video_paths, "audio": audio_rel, "text": text_rel}
    report = SampleReport(
        id=item.id, split=item.split, n_frames=n_frames, window_starts=starts,
        video_tokens=video_tokens, audio_tokens=audio_tokens.shape[0],
        text_tokens=text_tokens.shape[0], transcript_truncated=truncated,
        transcript_empty=empty)
    return entry, report


def extract(spec: ExtractionSpec) -> ExtractionReport:
    """Run the full job; returns the report (also written alongside the data)."""
    items = sorted(read_input_manifest(spec.manifest), key=lambda it: it.id)
    encoders = get_encoders(spec.backend)
    emb_dir = spec.out_dir / "embeddings"
    emb_dir.mkdir(parents=True, exist_ok=True)

    report = ExtractionReport(backend=spec.backend, windows=spec.windows,
                              window_frames=spec.window_frames, seed=spec.seed)
    entries = []
    for item in items:
        try:
            entry, sample_report = _extract_one(item, spec, encoders, emb_dir)
        except DecodeError as exc:
            logger.warning("skipping sample %r: %s", item.id, exc)
            report.skipped.append({"id": item.id, "reason": str(exc)})
            continue
        entries.append(entry)
        report.samples.append(sample_report)
        if sample_report.transcript_empty:
            logger.warning("sample %r has an empty transcript; emitted the "
                           "single-token minimal sequence", item.id)

    manifest_path = spec.out_dir / "manifest.jsonl"
    with manifest_path.open("w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(json.dumps({k: entry[k] for k in _MANIFEST_FIELDS}) + "\n")
    (spec.out_dir / "extraction_report.json").write_text(report.to_json() + "\n",
                                                         encoding="utf-8")
    logger.info("extracted %d samples (%d skipped) -> %s",
                len(entries), len(report.skipped), manifest_path)
    return report
