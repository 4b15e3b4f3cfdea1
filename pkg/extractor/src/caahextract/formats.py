"""Writer for the CAAH token-embedding file format.

Layout (little-endian): magic "CAAH", format version u16 = 1, reserved
u16 = 0, L u32, D u32, valid_count u32, then L*D float32 row-major — a
20-byte header. This is the published interchange format of the
conflictfusion package; it is reimplemented here from that contract so the
extractor stays decoupled from the classifier's internals, and the test
suite proves byte-for-byte agreement against the consumer's own writer.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"CAAH"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHHIII")


class FormatError(ValueError):
    """Raised when tokens cannot form a valid embedding file."""


def write_tokens(path, tokens: np.ndarray, valid_count: int | None = None) -> None:
    """Write an LxD float32 token matrix; every row is real unless stated."""
    tokens = np.ascontiguousarray(tokens, dtype=np.float32)
    if tokens.ndim != 2 or tokens.shape[0] < 1 or tokens.shape[1] < 1:
        raise FormatError(f"tokens must be a non-empty LxD matrix, got shape {tokens.shape}")
    if not np.isfinite(tokens).all():
        raise FormatError("tokens contain non-finite values")
    length, dim = tokens.shape
    valid = length if valid_count is None else int(valid_count)
    if not 1 <= valid <= length:
        raise FormatError(f"valid_count {valid} out of range [1, {length}]")
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, 0, length, dim, valid)
    Path(path).write_bytes(header + tokens.astype("<f4", copy=False).tobytes())
