"""Self-describing binary checkpoint container.

Layout (all integers little-endian):

    magic   4 bytes  b"CAHC"
    version u16      currently 1
    cfg_len u32      byte length of the JSON block
    cfg     cfg_len  UTF-8 JSON with sorted keys (configs + calibration)
    then one record per parameter, in the model's documented order:
        name_len u16, name (UTF-8), rank u8, dims rank*u32, payload float32 LE

Writing is fully deterministic: the JSON block sorts its keys and parameters
are serialized as float32 in a fixed order, so identical checkpoints are
byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass

import numpy as np

from .network import ModelConfig, ModelParams
from .training import TrainConfig

MAGIC = b"CAHC"
FORMAT_VERSION = 1

_HEAD = struct.Struct("<4sHI")
_NAME_LEN = struct.Struct("<H")
_RANK = struct.Struct("<B")


class CheckpointError(ValueError):
    """Raised on malformed or truncated checkpoint bytes."""


@dataclass
class Checkpoint:
    params: ModelParams
    config: TrainConfig
    best_threshold: float
    best_val_macro_f1: float
    epoch: int

    def __post_init__(self):
        if not 0.25 <= self.best_threshold <= 0.75:
            raise ValueError(f"threshold {self.best_threshold} outside the sweep range [0.25, 0.75]")

    def digest(self) -> str:
        """Short content hash used as a run identifier in reports."""
        h = hashlib.sha256()
        h.update(self._json_block())
        for name in self.params.names():
            h.update(self.params[name].data.astype(np.float32).tobytes())
        return h.hexdigest()[:12]

    def _json_block(self) -> bytes:
        meta = {
            "best_threshold": self.best_threshold,
            "best_val_macro_f1": self.best_val_macro_f1,
            "epoch": self.epoch,
            "model_config": self.params.config.to_dict(),
            "train_config": self.config.to_dict(),
        }
        return json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    blob = ckpt._json_block()
    parts = [_HEAD.pack(MAGIC, FORMAT_VERSION, len(blob)), blob]
    for name in ckpt.params.names():
        data = np.ascontiguousarray(ckpt.params[name].data, dtype=np.float32)
        encoded = name.encode("utf-8")
        parts.append(_NAME_LEN.pack(len(encoded)))
        parts.append(encoded)
        parts.append(_RANK.pack(data.ndim))
        parts.append(struct.pack(f"<{data.ndim}I", *data.shape))
        parts.append(data.tobytes(order="C"))
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def _take(buf: bytes, offset: int, count: int, what: str) -> tuple[bytes, int]:
    end = offset + count
    if end > len(buf):
        raise CheckpointError(f"truncated checkpoint: expected {count} bytes for {what}")
    return buf[offset:end], end


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        buf = fh.read()
    try:
        head, offset = _take(buf, 0, _HEAD.size, "header")
        magic, version, cfg_len = _HEAD.unpack(head)
        if magic != MAGIC:
            raise CheckpointError(f"bad magic {magic!r}, expected {MAGIC!r}")
        if version != FORMAT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        blob, offset = _take(buf, offset, cfg_len, "config block")
        try:
            meta = json.loads(blob.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"config block is not valid JSON: {exc}") from exc

        for key in ("best_threshold", "best_val_macro_f1", "epoch", "model_config", "train_config"):
            if key not in meta:
                raise CheckpointError(f"config block missing {key!r}")
        model_cfg = ModelConfig.from_dict(meta["model_config"])
        train_cfg = TrainConfig.from_dict(meta["train_config"])

        loaded: dict[str, np.ndarray] = {}
        while offset < len(buf):
            raw, offset = _take(buf, offset, _NAME_LEN.size, "parameter name length")
            (name_len,) = _NAME_LEN.unpack(raw)
            raw, offset = _take(buf, offset, name_len, "parameter name")
            name = raw.decode("utf-8")
            raw, offset = _take(buf, offset, _RANK.size, f"rank of {name!r}")
            (rank,) = _RANK.unpack(raw)
            raw, offset = _take(buf, offset, 4 * rank, f"shape of {name!r}")
            shape = struct.unpack(f"<{rank}I", raw)
            count = int(np.prod(shape, dtype=np.int64)) if rank else 1
            raw, offset = _take(buf, offset, 4 * count, f"payload of {name!r}")
            if name in loaded:
                raise CheckpointError(f"duplicate parameter {name!r}")
            loaded[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).astype(np.float32)

        params = ModelParams.from_arrays(model_cfg, loaded)
    except CheckpointError as exc:
        raise CheckpointError(f"{path}: {exc}") from None
    return Checkpoint(
        params=params,
        config=train_cfg,
        best_threshold=float(meta["best_threshold"]),
        best_val_macro_f1=float(meta["best_val_macro_f1"]),
        epoch=int(meta["epoch"]),
    )
