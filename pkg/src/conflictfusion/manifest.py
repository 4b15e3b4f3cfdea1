"""Dataset manifest: one labelled video per line of line-delimited JSON.

Line schema: {"id": str, "split": str, "label": 0|1|null,
"video": [path, ...], "audio": path, "text": path}, paths relative to the
manifest file's directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .embeddings import EmbeddingSequence, read_embedding

SPLITS = ("train", "val", "test", "test_unlabeled")
LABELLED_SPLITS = ("train", "val", "test")
_FIELDS = ("id", "split", "label", "video", "audio", "text")


class ManifestError(ValueError):
    """Raised for malformed manifests, naming the offending line."""


@dataclass
class Sample:
    """One video's worth of pre-extracted embeddings.

    `video`/`audio`/`text` entries are either EmbeddingSequence values or
    paths; file-backed entries load lazily on first access and are cached.
    """

    id: str
    split: str
    label: int | None
    video: list
    audio: object
    text: object

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ManifestError(f"sample {self.id!r}: unknown split {self.split!r}")
        if len(self.video) < 1:
            raise ManifestError(f"sample {self.id!r}: at least one video window is required")

    def _load(self, entry):
        if isinstance(entry, EmbeddingSequence):
            return entry
        return read_embedding(entry)

    def video_windows(self) -> list[EmbeddingSequence]:
        self.video = [self._load(e) for e in self.video]
        return self.video

    def audio_seq(self) -> EmbeddingSequence:
        self.audio = self._load(self.audio)
        return self.audio

    def text_seq(self) -> EmbeddingSequence:
        self.text = self._load(self.text)
        return self.text

    @property
    def n_windows(self) -> int:
        return len(self.video)


def _parse_line(obj: dict, base: Path, lineno: int) -> Sample:
    for key in _FIELDS:
        if key not in obj:
            raise ManifestError(f"line {lineno}: missing field {key!r}")
    extra = set(obj) - set(_FIELDS)
    if extra:
        raise ManifestError(f"line {lineno}: unknown fields {sorted(extra)}")
    split = obj["split"]
    if split not in SPLITS:
        raise ManifestError(f"line {lineno}: unknown split {split!r} (expected one of {list(SPLITS)})")
    label = obj["label"]
    if split in LABELLED_SPLITS:
        if label not in (0, 1):
            raise ManifestError(f"line {lineno}: split {split!r} requires label 0 or 1, got {label!r}")
    elif label is not None:
        raise ManifestError(f"line {lineno}: split test_unlabeled must have label null, got {label!r}")
    video = obj["video"]
    if not isinstance(video, list) or len(video) < 1:
        raise ManifestError(f"line {lineno}: video must be a non-empty array of paths")
    try:
        return Sample(
            id=str(obj["id"]),
            split=split,
            label=label,
            video=[base / p for p in video],
            audio=base / obj["audio"],
            text=base / obj["text"],
        )
    except ManifestError as exc:
        raise ManifestError(f"line {lineno}: {exc}") from None


def read_manifest(path) -> list[Sample]:
    """Parse a manifest strictly; any defect error names its line number."""
    path = Path(path)
    base = path.parent
    samples = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"line {lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise ManifestError(f"line {lineno}: expected a JSON object")
            samples.append(_parse_line(obj, base, lineno))
    return samples


def write_manifest(path, entries: list[dict]) -> None:
    """Write manifest lines with the canonical field order; paths are stored as given."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for entry in entries:
            ordered = {key: entry[key] for key in _FIELDS}
            fh.write(json.dumps(ordered) + "\n")


def split_samples(samples: list[Sample], split: str) -> list[Sample]:
    if split not in SPLITS:
        raise ManifestError(f"unknown split {split!r}")
    return [s for s in samples if s.split == split]
