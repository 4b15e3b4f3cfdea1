"""Extraction job description and the input-manifest reader.

The input manifest is line-delimited JSON, one raw-media sample per line:
{"id": str, "video": path, "audio": path, "transcript": str} plus optional
"split" and "label" keys that pass through to the output dataset manifest
(default: split "test_unlabeled", label null). "video" may point to a video
file or to a directory of pre-cropped face frames.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

BACKENDS = ("pretrained", "stub")
SPLITS = ("train", "val", "test", "test_unlabeled")
LABELLED_SPLITS = ("train", "val", "test")
_REQUIRED = ("id", "video", "audio", "transcript")
_OPTIONAL = ("split", "label")
_ID_RE = re.compile(r"^[A-Za-z0-9._-]+$")


class SpecError(ValueError):
    """Raised for invalid job parameters or a malformed input manifest."""


@dataclass(frozen=True)
class ExtractionSpec:
    """Everything needed to turn raw media into an embedding dataset."""

    manifest: Path
    out_dir: Path
    windows: int = 5          # K: video windows per sample
    window_frames: int = 16   # T: frames per window
    seed: int = 0
    backend: str = "pretrained"
    plain_frames: bool = False  # inputs are full scenes, not face crops:
                                # center-crop to square before resizing

    def __post_init__(self):
        object.__setattr__(self, "manifest", Path(self.manifest))
        object.__setattr__(self, "out_dir", Path(self.out_dir))
        if self.windows < 1:
            raise SpecError(f"windows must be >= 1, got {self.windows}")
        if self.window_frames < 1:
            raise SpecError(f"window_frames must be >= 1, got {self.window_frames}")
        if self.backend not in BACKENDS:
            raise SpecError(f"unknown backend {self.backend!r} (expected one of {list(BACKENDS)})")


@dataclass(frozen=True)
class InputItem:
    """One raw-media sample from the input manifest, paths resolved."""

    id: str
    video: Path
    audio: Path
    transcript: str
    split: str = "test_unlabeled"
    label: int | None = None


def _parse_item(obj: dict, base: Path, lineno: int) -> InputItem:
    for key in _REQUIRED:
        if key not in obj:
            raise SpecError(f"line {lineno}: missing field {key!r}")
    extra = set(obj) - set(_REQUIRED) - set(_OPTIONAL)
    if extra:
        raise SpecError(f"line {lineno}: unknown fields {sorted(extra)}")
    sample_id = str(obj["id"])
    if not _ID_RE.match(sample_id):
        raise SpecError(f"line {lineno}: id {sample_id!r} must match [A-Za-z0-9._-]+")
    if not isinstance(obj["transcript"], str):
        raise SpecError(f"line {lineno}: transcript must be a string")
    split = obj.get("split", "test_unlabeled")
    if split not in SPLITS:
        raise SpecError(f"line {lineno}: unknown split {split!r} (expected one of {list(SPLITS)})")
    label = obj.get("label")
    # Mirror the dataset manifest's label rules so the output is always
    # accepted downstream: labelled splits need 0/1, the unlabeled split null.
    if split in LABELLED_SPLITS:
        if label not in (0, 1):
            raise SpecError(f"line {lineno}: split {split!r} requires label 0 or 1, got {label!r}")
    elif label is not None:
        raise SpecError(f"line {lineno}: split test_unlabeled must have label null, got {label!r}")
    return InputItem(id=sample_id, video=base / obj["video"], audio=base / obj["audio"],
                     transcript=obj["transcript"], split=split, label=label)


def read_input_manifest(path) -> list[InputItem]:
    """Parse the input manifest strictly; errors name the offending line."""
    path = Path(path)
    if not path.is_file():
        raise SpecError(f"input manifest not found: {path}")
    base = path.parent
    items: list[InputItem] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SpecError(f"line {lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise SpecError(f"line {lineno}: expected a JSON object")
            item = _parse_item(obj, base, lineno)
            if item.id in seen:
                raise SpecError(f"line {lineno}: duplicate id {item.id!r}")
            seen.add(item.id)
            items.append(item)
    if not items:
        raise SpecError(f"input manifest {path} has no samples")
    return items
