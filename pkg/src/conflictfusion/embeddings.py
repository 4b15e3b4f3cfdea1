"""Token-embedding sequences and their binary file format.

File layout (little-endian): magic "CAAH", format version u16 = 1,
reserved u16 = 0, L u32, D u32, valid_count u32, then L*D float32
row-major. Header is 20 bytes.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"CAAH"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHHIII")


class EmbeddingFormatError(ValueError):
    """Raised for malformed or rejected embedding files."""


@dataclass(frozen=True)
class EmbeddingSequence:
    """One modality's token matrix plus how many leading tokens are real.

    Rows past `valid_count` are padding and must never influence pooled
    outputs; all values must be finite.
    """

    tokens: np.ndarray
    valid_count: int

    def __post_init__(self):
        tokens = np.ascontiguousarray(self.tokens, dtype=np.float32)
        object.__setattr__(self, "tokens", tokens)
        if tokens.ndim != 2 or tokens.shape[0] < 1 or tokens.shape[1] < 1:
            raise EmbeddingFormatError(f"tokens must be a non-empty LxD matrix, got shape {tokens.shape}")
        if not 1 <= self.valid_count <= tokens.shape[0]:
            raise EmbeddingFormatError(
                f"valid_count {self.valid_count} out of range [1, {tokens.shape[0]}]")
        if not np.isfinite(tokens).all():
            raise EmbeddingFormatError("tokens contain non-finite values")

    @property
    def length(self) -> int:
        return self.tokens.shape[0]

    @property
    def dim(self) -> int:
        return self.tokens.shape[1]

    @property
    def valid_tokens(self) -> np.ndarray:
        return self.tokens[: self.valid_count]

    def __eq__(self, other):
        if not isinstance(other, EmbeddingSequence):
            return NotImplemented
        return self.valid_count == other.valid_count and np.array_equal(self.tokens, other.tokens)


def write_embedding(path, seq: EmbeddingSequence) -> None:
    """Write `seq` to `path` in the versioned binary layout above."""
    path = Path(path)
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, 0, seq.length, seq.dim, seq.valid_count)
    payload = seq.tokens.astype("<f4", copy=False).tobytes()
    path.write_bytes(header + payload)


def read_embedding(path) -> EmbeddingSequence:
    """Read and validate an embedding file; roundtrips write_embedding bit-exactly."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise EmbeddingFormatError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, version, _reserved, length, dim, valid_count = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise EmbeddingFormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise EmbeddingFormatError(f"{path}: unsupported format version {version}")
    expected = _HEADER.size + 4 * length * dim
    if len(raw) != expected:
        raise EmbeddingFormatError(f"{path}: expected {expected} bytes, found {len(raw)}")
    tokens = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(length, dim).copy()
    try:
        return EmbeddingSequence(tokens=tokens, valid_count=valid_count)
    except EmbeddingFormatError as exc:
        raise EmbeddingFormatError(f"{path}: {exc}") from None
