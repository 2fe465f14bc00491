"""Parameter update rules operating on plain numpy arrays."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _check(params, grads):
    if len(params) != len(grads):
        raise ValueError(f"got {len(params)} params but {len(grads)} grads")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ValueError(f"param/grad shape mismatch: {p.shape} vs {g.shape}")


def sgd_step(params: list[np.ndarray], grads: list[np.ndarray], lr: float) -> list[np.ndarray]:
    _check(params, grads)
    return [(p - lr * g).astype(p.dtype) for p, g in zip(params, grads)]


@dataclass
class AdamState:
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def adam_step(
    params: list[np.ndarray],
    grads: list[np.ndarray],
    state: AdamState,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[list[np.ndarray], AdamState]:
    """One bias-corrected Adam update. Returns new params and a new state."""
    _check(params, grads)
    m_prev = state.m or [np.zeros_like(p) for p in params]
    v_prev = state.v or [np.zeros_like(p) for p in params]
    t = state.step + 1
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, m_prev, v_prev):
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        m_hat = m / c1
        v_hat = v / c2
        new_p.append((p - lr * m_hat / (np.sqrt(v_hat) + eps)).astype(p.dtype))
        new_m.append(m.astype(p.dtype))
        new_v.append(v.astype(p.dtype))
    return new_p, AdamState(t, new_m, new_v)
