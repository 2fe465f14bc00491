"""Single-step FGSM and the accuracy/PSNR sweep over epsilon."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from degbench import tensor as T
from degbench.metrics import psnr, top_k_from_scores
from degbench.models.network import Network, predict

DEFAULT_EPS_GRID = (0.0, 0.01, 0.02, 0.05, 0.1, 0.2)


class AttackError(ValueError):
    pass


@dataclass(frozen=True)
class FgsmConfig:
    epsilon: float
    clip: bool = True

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise AttackError(f"epsilon must be >= 0, got {self.epsilon}")
        if not self.clip:
            raise AttackError("FGSM outputs are always clipped to [0, 1]")


def input_gradient(model: Network, x: np.ndarray, y: np.ndarray, dtype=np.float32) -> np.ndarray:
    """Gradient of the model's own training loss with respect to the input batch."""
    xt = T.Tensor(np.asarray(x, dtype=dtype), requires_grad=True)
    p = model.bind(track=False, dtype=dtype)
    loss, _ = model.loss_and_forward(xt, np.asarray(y), params=p, training=False)
    if not loss.requires_grad:
        raise AttackError(f"loss of {model.cfg.name!r} is not differentiable w.r.t. the input")
    T.backward(loss)
    if xt.grad is None:
        raise AttackError(f"no input gradient reached the input of {model.cfg.name!r}")
    # loss is a batch mean; rescale so per-sample gradients do not shrink with N
    return np.asarray(xt.grad) * len(x)


def fgsm_untargeted(model: Network, x: np.ndarray, y: np.ndarray, eps: float,
                    batch_size: int = 64) -> np.ndarray:
    """x' = clip(x + eps * sign(grad_x L(x, y)), 0, 1) with sign(0) = 0."""
    FgsmConfig(eps)
    x = np.asarray(x)
    if len(x) == 0:
        raise AttackError("empty batch")
    if eps == 0:
        return x.copy()
    out = np.empty_like(x)
    for i in range(0, len(x), batch_size):
        xb = x[i:i + batch_size]
        g = input_gradient(model, xb, np.asarray(y)[i:i + batch_size])
        out[i:i + batch_size] = np.clip(xb + eps * np.sign(g).astype(x.dtype), 0, 1)
    return out


@dataclass(frozen=True)
class AdversarialRecord:
    eps: float
    top1: float
    mean_psnr: float  # over finite entries; inf when every image is unchanged
    n: int
    n_infinite: int


def adversarial_sweep(model: Network, x: np.ndarray, y: np.ndarray,
                      eps_list: Sequence[float] = DEFAULT_EPS_GRID) -> list[AdversarialRecord]:
    """Top-1 accuracy and mean PSNR(x', x) per epsilon."""
    eps_list = list(eps_list)
    if not eps_list:
        raise AttackError("eps_list is empty")
    if len(x) == 0:
        raise AttackError("empty dataset")
    y = np.asarray(y)
    records = []
    for eps in eps_list:
        adv = fgsm_untargeted(model, x, y, eps)
        top1 = top_k_from_scores(predict(model, adv), y, 1)
        values = [psnr(a.astype(np.float64), b.astype(np.float64)) for a, b in zip(adv, x)]
        finite = [v for v in values if math.isfinite(v)]
        mean = float(np.mean(finite)) if finite else math.inf
        records.append(AdversarialRecord(float(eps), top1, mean, len(x), len(values) - len(finite)))
    return records
