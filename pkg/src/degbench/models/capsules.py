"""Capsule nonlinearity, routing-by-agreement and the margin loss.

Prediction vectors are laid out ``(N, J, I, E)``: batch, output capsule,
input capsule, output dimension. Logits and couplings are ``(N, J, I)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from degbench import tensor as T
from degbench.tensor import Tensor


def squash(s: Tensor, axis: int = -1, eps: float = 1e-12) -> Tensor:
    """``|s|^2 / (1 + |s|^2) * s / |s|``, with the zero vector mapped to zero."""
    sq = T.reduce_sum(s * s, axis=axis, keepdims=True)
    scale = sq / ((sq + 1.0) * T.sqrt(sq + eps))
    return s * scale


@dataclass
class RoutingResult:
    v: Tensor
    couplings: list[np.ndarray] = field(default_factory=list)
    logits: list[np.ndarray] = field(default_factory=list)


def dynamic_routing(u_hat: Tensor, iterations: int) -> RoutingResult:
    if iterations < 1:
        raise ValueError(f"routing needs at least one iteration, got {iterations}")
    u_hat = T.as_tensor(u_hat)
    n, j, i, e = u_hat.shape
    b = Tensor(np.zeros((n, j, i), dtype=u_hat.dtype))
    result = RoutingResult(v=None)  # type: ignore[arg-type]
    for it in range(iterations):
        c = T.softmax(b, axis=1)
        result.logits.append(b.data)
        result.couplings.append(c.data)
        s = T.matmul(T.reshape(c, (n, j, 1, i)), u_hat)
        v = squash(T.reshape(s, (n, j, e)), axis=-1)
        if it < iterations - 1:
            agreement = T.matmul(u_hat, T.reshape(v, (n, j, e, 1)))
            b = b + T.reshape(agreement, (n, j, i))
    result.v = v
    return result


@dataclass(frozen=True)
class MarginLossParams:
    m_plus: float = 0.9
    m_minus: float = 0.1
    lambda_down: float = 0.5

    def __post_init__(self):
        if not 0 < self.m_minus < self.m_plus < 1:
            raise ValueError("need 0 < m_minus < m_plus < 1")


def margin_loss(lengths: Tensor, labels, params: MarginLossParams = MarginLossParams(),
                reduce: str = "mean") -> Tensor:
    """Per-sample ``sum_k T_k max(0, m+ - |v_k|)^2 + lambda (1-T_k) max(0, |v_k| - m-)^2``.

    ``lengths`` is (N, classes) or a single (classes,) vector; ``reduce`` is
    ``"mean"`` over the batch or ``"sum"``.
    """
    lengths = T.as_tensor(lengths)
    single = lengths.ndim == 1
    if single:
        lengths = T.reshape(lengths, (1, -1))
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    n, k = lengths.shape
    onehot = np.zeros((n, k), dtype=lengths.dtype)
    onehot[np.arange(n), labels] = 1.0
    present = T.relu(params.m_plus - lengths) ** 2
    absent = T.relu(lengths - params.m_minus) ** 2
    per = T.reduce_sum(present * onehot + absent * ((1.0 - onehot) * params.lambda_down), axis=1)
    if reduce == "sum" or single:
        return T.reduce_sum(per)
    return T.reduce_mean(per)
