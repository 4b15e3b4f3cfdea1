"""The conflict-aware fusion network.

Per modality: linear projection, then learned soft-attention pooling. The
three pooled vectors and their pairwise absolute differences are fused by a
two-layer FFN feeding the full-fusion head; a parallel text-only head gives
the auxiliary logit. At inference the two sigmoids are blended convexly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .batching import Batch


@dataclass(frozen=True)
class ModelConfig:
    d_in: int
    d: int
    head_hidden: int = 512
    dropout: float = 0.3
    conflict_features: bool = True
    use_video: bool = True
    use_audio: bool = True
    use_text: bool = True
    text_head_ffn: bool = False

    def __post_init__(self):
        if self.d_in < 1 or self.d < 1 or self.head_hidden < 1:
            raise ValueError("model dimensions must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        if not (self.use_video or self.use_audio or self.use_text):
            raise ValueError("at least one modality must be enabled")

    @property
    def fusion_width(self) -> int:
        return (6 if self.conflict_features else 3) * self.d

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown ModelConfig keys: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class BlendConfig:
    """Inference blend weight on the text branch."""

    alpha: float = 0.6

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")


class ModelParams:
    """All trainable tensors, in a fixed named order.

    The order is the construction order below; it defines both the
    initialisation RNG stream and the checkpoint record layout.
    """

    def __init__(self, config: ModelConfig, tensors: dict[str, Tensor]):
        self.config = config
        self.tensors = tensors

    @classmethod
    def init(cls, config: ModelConfig, seed_or_rng=0, dtype=np.float32) -> "ModelParams":
        """Linear weights uniform in +-sqrt(1/fan_in), biases zero, LN affine
        identity, attention queries zero (pooling starts as a masked mean)."""
        rng = seed_or_rng if isinstance(seed_or_rng, np.random.Generator) \
            else np.random.default_rng(seed_or_rng)
        tensors: dict[str, Tensor] = {}

        def param(name, arr):
            tensors[name] = Tensor(np.asarray(arr, dtype=dtype), requires_grad=True)

        def linear(name, fan_in, fan_out):
            bound = np.sqrt(1.0 / fan_in)
            param(f"{name}.w", rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            param(f"{name}.b", np.zeros(fan_out))

        def layer_norm(name, width):
            param(f"{name}.gain", np.ones(width))
            param(f"{name}.bias", np.zeros(width))

        d_in, d = config.d_in, config.d
        for m in ("v", "a", "t"):
            linear(f"proj_{m}", d_in, d)
        for m in ("v", "a", "t"):
            param(f"attn_{m}.w", np.zeros(d))
        width = config.fusion_width
        layer_norm("ffn.ln", width)
        linear("ffn.fc1", width, 2 * width)
        linear("ffn.fc2", 2 * width, width)
        layer_norm("head_full.ln", width)
        linear("head_full.fc1", width, config.head_hidden)
        linear("head_full.fc2", config.head_hidden, 1)
        if config.text_head_ffn:
            layer_norm("text_ffn.ln", d)
            linear("text_ffn.fc1", d, 2 * d)
            linear("text_ffn.fc2", 2 * d, d)
        layer_norm("head_text.ln", d)
        linear("head_text.fc1", d, config.head_hidden)
        linear("head_text.fc2", config.head_hidden, 1)
        return cls(config, tensors)

    @classmethod
    def from_arrays(cls, config: ModelConfig, arrays: dict[str, np.ndarray],
                    dtype=np.float32) -> "ModelParams":
        """Rebuild from named arrays, validating names and shapes against the
        structure the config implies. Catches truncated or mismatched files."""
        template = cls.init(config, seed_or_rng=0, dtype=dtype)
        expected = set(template.names())
        got = set(arrays)
        if expected != got:
            missing = sorted(expected - got)
            extra = sorted(got - expected)
            detail = []
            if missing:
                detail.append(f"missing {missing}")
            if extra:
                detail.append(f"unexpected {extra}")
            raise ValueError("parameter names do not match the config: " + "; ".join(detail))
        for name in template.names():
            want = template[name].data.shape
            have = arrays[name].shape
            if want != have:
                raise ValueError(f"parameter {name!r} has shape {have}, expected {want}")
            template.tensors[name] = Tensor(np.ascontiguousarray(arrays[name], dtype=dtype),
                                            requires_grad=True)
        return template

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def names(self) -> list[str]:
        return list(self.tensors)

    def tensor_list(self) -> list[Tensor]:
        return list(self.tensors.values())

    def param_count(self) -> int:
        return sum(t.size for t in self.tensors.values())

    def all_finite(self) -> bool:
        return all(np.isfinite(t.data).all() for t in self.tensors.values())

    def copy(self) -> "ModelParams":
        return ModelParams(self.config, {
            name: Tensor(t.data.copy(), requires_grad=True) for name, t in self.tensors.items()
        })

    def astype(self, dtype) -> "ModelParams":
        return ModelParams(self.config, {
            name: Tensor(t.data.astype(dtype), requires_grad=True)
            for name, t in self.tensors.items()
        })

    @property
    def dtype(self):
        return next(iter(self.tensors.values())).data.dtype


def expected_param_count(config: ModelConfig) -> int:
    """Closed-form parameter count; asserted against construction in tests."""
    d_in, d, h = config.d_in, config.d, config.head_hidden
    f = config.fusion_width
    projections = 3 * (d_in * d + d)
    queries = 3 * d
    ffn = 2 * f + (f * 2 * f + 2 * f) + (2 * f * f + f)
    head_full = 2 * f + (f * h + h) + (h + 1)
    head_text = 2 * d + (d * h + h) + (h + 1)
    text_ffn = (2 * d + (d * 2 * d + 2 * d) + (2 * d * d + d)) if config.text_head_ffn else 0
    return projections + queries + ffn + head_full + text_ffn + head_text


@dataclass
class ForwardResult:
    logit_full: Tensor      # [B]
    logit_text: Tensor      # [B]
    pooled: dict            # modality -> np.ndarray [B, d] (detached)

    def conflict_norms(self) -> dict[str, np.ndarray]:
        """L2 norms of the pairwise pooled differences, per sample."""
        v, a, t = self.pooled["video"], self.pooled["audio"], self.pooled["text"]
        return {
            "va": np.linalg.norm(v - a, axis=1),
            "vt": np.linalg.norm(v - t, axis=1),
            "at": np.linalg.norm(a - t, axis=1),
        }


def attention_pool(seq: Tensor, mask: np.ndarray, query: Tensor) -> Tensor:
    """Softmax(seq . query) weights over valid tokens, then the weighted sum.

    seq [B, L, D], mask [B, L] bool, query [D] -> [B, D].
    """
    b, l, d = seq.shape
    scores = ad.reshape(ad.matmul(ad.reshape(seq, (b * l, d)), ad.reshape(query, (d, 1))), (b, l))
    weights = ad.masked_softmax(scores, mask)
    return ad.tsum(ad.mul(ad.reshape(weights, (b, l, 1)), seq), axis=1)


def conflict_features(v: Tensor, a: Tensor, t: Tensor) -> tuple[Tensor, Tensor, Tensor]:
    """Pairwise elementwise absolute differences (|x| subgradient at 0 is 0)."""
    return ad.tabs(ad.sub(v, a)), ad.tabs(ad.sub(v, t)), ad.tabs(ad.sub(a, t))


def _mlp_head(x: Tensor, params: ModelParams, prefix: str, p_drop: float,
              train: bool, rng) -> Tensor:
    x = ad.layer_norm(x, params[f"{prefix}.ln.gain"], params[f"{prefix}.ln.bias"])
    x = ad.linear(x, params[f"{prefix}.fc1.w"], params[f"{prefix}.fc1.b"])
    x = ad.gelu(x)
    x = ad.dropout(x, p_drop, rng, train)
    return ad.linear(x, params[f"{prefix}.fc2.w"], params[f"{prefix}.fc2.b"])


def forward(params: ModelParams, batch: Batch, *, train: bool = False,
            rng: np.random.Generator | None = None) -> ForwardResult:
    """Run the network on a batch; dropout is live only in train mode.

    Dropout draws consume `rng` in a fixed order (fusion FFN, full head,
    optional text FFN, text head), so a seeded generator makes training
    steps reproducible.
    """
    cfg = params.config
    if train and cfg.dropout > 0.0 and rng is None:
        raise ValueError("train-mode forward with dropout needs an rng")
    dtype = params.dtype

    modality_inputs = {
        "video": (batch.video, batch.video_mask, "v", cfg.use_video),
        "audio": (batch.audio, batch.audio_mask, "a", cfg.use_audio),
        "text": (batch.text, batch.text_mask, "t", cfg.use_text),
    }
    b = batch.size
    pooled: dict[str, Tensor] = {}
    for name, (tokens, mask, tag, enabled) in modality_inputs.items():
        if not enabled:
            pooled[name] = Tensor(np.zeros((b, cfg.d), dtype=dtype))
            continue
        if tokens.shape[2] != cfg.d_in:
            raise ValueError(f"{name} tokens have dim {tokens.shape[2]}, model expects {cfg.d_in}")
        x = Tensor(tokens.astype(dtype, copy=False))
        bl = x.shape[0] * x.shape[1]
        flat = ad.linear(ad.reshape(x, (bl, cfg.d_in)),
                         params[f"proj_{tag}.w"], params[f"proj_{tag}.b"])
        seq = ad.reshape(flat, (b, x.shape[1], cfg.d))
        pooled[name] = attention_pool(seq, mask, params[f"attn_{tag}.w"])

    v, a, t = pooled["video"], pooled["audio"], pooled["text"]
    parts = [v, a, t]
    if cfg.conflict_features:
        parts.extend(conflict_features(v, a, t))
    fused = ad.concat(parts, axis=1)

    h = ad.layer_norm(fused, params["ffn.ln.gain"], params["ffn.ln.bias"])
    h = ad.linear(h, params["ffn.fc1.w"], params["ffn.fc1.b"])
    h = ad.gelu(h)
    h = ad.dropout(h, cfg.dropout, rng, train)
    h = ad.linear(h, params["ffn.fc2.w"], params["ffn.fc2.b"])
    logit_full = ad.reshape(_mlp_head(h, params, "head_full", cfg.dropout, train, rng), (b,))

    text_in = t
    if cfg.text_head_ffn:
        z = ad.layer_norm(text_in, params["text_ffn.ln.gain"], params["text_ffn.ln.bias"])
        z = ad.linear(z, params["text_ffn.fc1.w"], params["text_ffn.fc1.b"])
        z = ad.gelu(z)
        z = ad.dropout(z, cfg.dropout, rng, train)
        text_in = ad.linear(z, params["text_ffn.fc2.w"], params["text_ffn.fc2.b"])
    logit_text = ad.reshape(_mlp_head(text_in, params, "head_text", cfg.dropout, train, rng), (b,))

    detached = {name: p.data.astype(np.float64, copy=True) for name, p in pooled.items()}
    return ForwardResult(logit_full=logit_full, logit_text=logit_text, pooled=detached)


def blend(logit_text, logit_full, cfg: BlendConfig | float = BlendConfig()):
    """p = alpha*sigmoid(l_text) + (1-alpha)*sigmoid(l_full), elementwise."""
    alpha = cfg.alpha if isinstance(cfg, BlendConfig) else BlendConfig(float(cfg)).alpha
    lt = np.asarray(logit_text, dtype=np.float64)
    lf = np.asarray(logit_full, dtype=np.float64)
    if not (np.isfinite(lt).all() and np.isfinite(lf).all()):
        raise ValueError("blend requires finite logits")
    out = alpha * ad.stable_sigmoid(lt) + (1.0 - alpha) * ad.stable_sigmoid(lf)
    return float(out) if np.ndim(out) == 0 else out
