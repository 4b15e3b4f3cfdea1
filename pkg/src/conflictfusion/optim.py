"""AdamW with decoupled weight decay, plus the cosine learning-rate schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor


@dataclass
class OptimState:
    """Per-parameter Adam moments and the shared hyperparameters.

    `m`/`v` start at zero and `t` advances by exactly 1 per applied step.
    """

    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 1e-2
    base_lr: float = 3e-5
    min_lr: float = 3e-7
    total_steps: int = 1

    @classmethod
    def for_params(cls, params: list[Tensor], *, betas=(0.9, 0.999), eps=1e-8,
                   weight_decay=1e-2, base_lr=3e-5, min_lr=3e-7, total_steps=1) -> "OptimState":
        return cls(
            m=[np.zeros_like(p.data) for p in params],
            v=[np.zeros_like(p.data) for p in params],
            betas=betas,
            eps=eps,
            weight_decay=weight_decay,
            base_lr=base_lr,
            min_lr=min_lr,
            total_steps=total_steps,
        )


def adamw_step(params: list[Tensor], state: OptimState, lr: float) -> None:
    """One AdamW update in place: p -= lr*m_hat/(sqrt(v_hat)+eps) + lr*wd*p.

    Bias-corrected moments, decoupled weight decay. A parameter with no
    accumulated gradient is treated as grad = 0 (decay still applies).
    """
    if lr < 0.0:
        raise ValueError(f"lr must be non-negative, got {lr}")
    if len(params) != len(state.m):
        raise ValueError(f"optimiser state tracks {len(state.m)} parameters, got {len(params)}")
    b1, b2 = state.betas
    state.t += 1
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    for i, p in enumerate(params):
        if state.m[i].shape != p.data.shape:
            raise ValueError(
                f"parameter {i} has shape {p.data.shape}, optimiser state has {state.m[i].shape}")
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        if g.shape != p.data.shape:
            raise ValueError(f"gradient {i} has shape {g.shape}, parameter has {p.data.shape}")
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g
        m_hat = state.m[i] / bc1
        v_hat = state.v[i] / bc2
        update = lr * m_hat / (np.sqrt(v_hat) + state.eps) + (lr * state.weight_decay) * p.data
        p.data -= update.astype(p.data.dtype, copy=False)


def cosine_lr(step: int, total_steps: int, base_lr: float, min_lr: float) -> float:
    """Cosine annealing from base_lr (step 0) to min_lr (step total_steps).

    Steps past the end clamp to min_lr.
    """
    if total_steps < 1:
        raise ValueError(f"total_steps must be >= 1, got {total_steps}")
    if step < 0:
        raise ValueError(f"step must be >= 0, got {step}")
    if step > total_steps:
        return min_lr
    return min_lr + 0.5 * (base_lr - min_lr) * (1.0 + math.cos(math.pi * step / total_steps))
