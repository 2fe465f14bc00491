"""Mini-batch training with Adam (or SGD) and validation-plateau early stopping."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from degbench import tensor as T
from degbench.metrics import top_k_from_scores
from degbench.models.network import Network, predict
from degbench.optim import AdamState, adam_step, sgd_step
from degbench.rng import Prng

log = logging.getLogger(__name__)

TRAIN_STREAM = 0x7A11


@dataclass
class Hyperparams:
    optimizer: str = "adam"
    lr: float = 1e-3
    batch_size: int = 32
    epochs: int = 30
    patience: int = 4
    val_fraction: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_steps: int | None = None
    # training-time augmentation; off by default
    shift: int = 0  # max integer translation in pixels, edge-replicated
    permute_channels: bool = False


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    train_top1: float
    val_top1: float | None


@dataclass
class TrainResult:
    weights: dict[str, np.ndarray]
    history: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    steps: int = 0


class NumericError(FloatingPointError):
    pass


def _split_val(n: int, frac: float, rng: Prng) -> tuple[np.ndarray, np.ndarray]:
    order = rng.permutation(n)
    n_val = int(round(n * frac)) if frac > 0 else 0
    if n_val >= n:
        n_val = 0
    return np.sort(order[n_val:]), np.sort(order[:n_val])


def augment(xb: np.ndarray, hp: Hyperparams, rng: Prng) -> np.ndarray:
    """Per-sample random translation and colour-channel permutation of an NCHW batch."""
    if hp.shift <= 0 and not hp.permute_channels:
        return xb
    out = np.empty_like(xb)
    s = hp.shift
    h, w = xb.shape[2:]
    padded = np.pad(xb, ((0, 0), (0, 0), (s, s), (s, s)), mode="edge") if s else xb
    for i in range(len(xb)):
        dy, dx = (rng.integers(0, 2 * s + 1, 2) if s else (0, 0))
        img = padded[i, :, dy:dy + h, dx:dx + w]
        if hp.permute_channels:
            img = img[rng.permutation(img.shape[0])]
        out[i] = img
    return out


def train_step(model: Network, xb: np.ndarray, yb: np.ndarray, hp: Hyperparams, state: AdamState,
               rng: Prng) -> tuple[float, np.ndarray, AdamState]:
    """One update; returns the batch loss, the batch scores and the new optimizer state."""
    p = model.bind(track=True)
    loss, res = model.loss_and_forward(xb, yb, params=p, training=True, rng=rng)
    if not np.isfinite(loss.data):
        raise NumericError(f"non-finite training loss {float(loss.data)}")
    T.backward(loss)
    names = model.trainable
    params = [model.params[n] for n in names]
    grads = [p[n].grad if p[n].grad is not None else np.zeros_like(model.params[n]) for n in names]
    if hp.optimizer == "adam":
        new, state = adam_step(params, grads, state, hp.lr, hp.beta1, hp.beta2, hp.eps)
    elif hp.optimizer == "sgd":
        new = sgd_step(params, grads, hp.lr)
    else:
        raise ValueError(f"unknown optimizer {hp.optimizer!r}")
    for n, v in zip(names, new):
        model.params[n] = v
    return float(loss.data), res.scores.data, state


def train(model: Network, x: np.ndarray, y: np.ndarray, hp: Hyperparams = Hyperparams(), seed: int = 0,
          x_val: np.ndarray | None = None, y_val: np.ndarray | None = None) -> TrainResult:
    """Train ``model`` in place and return the best weights with per-epoch history.

    Without an explicit validation set, ``hp.val_fraction`` of ``x`` is held
    out. The weights of the best validation epoch are restored at the end.
    """
    x = np.asarray(x, dtype=np.float32)
    y = np.asarray(y, dtype=np.int64)
    base = Prng(seed, TRAIN_STREAM)
    if x_val is None:
        tr_idx, va_idx = _split_val(len(x), hp.val_fraction, base.child(0))
        x_val, y_val = x[va_idx], y[va_idx]
        x, y = x[tr_idx], y[tr_idx]
    has_val = x_val is not None and len(x_val) > 0

    state = AdamState()
    result = TrainResult(weights=model.state())
    best = -1.0
    stale = 0
    steps = 0
    for epoch in range(1, hp.epochs + 1):
        order = base.child(1, epoch).permutation(len(x))
        losses, correct = [], 0
        for b, start in enumerate(range(0, len(x), hp.batch_size)):
            idx = order[start:start + hp.batch_size]
            xb = augment(x[idx], hp, base.child(4, epoch, b))
            loss, scores, state = train_step(model, xb, y[idx], hp, state, base.child(2, epoch, b))
            losses.append(loss * len(idx))
            correct += int(np.sum(np.argmax(scores, axis=1) == y[idx]))
            steps += 1
            if hp.max_steps is not None and steps >= hp.max_steps:
                break
        train_top1 = correct / max(1, sum(min(hp.batch_size, len(x) - s) for s in range(0, len(x), hp.batch_size)))
        val_top1 = top_k_from_scores(predict(model, x_val), y_val, 1) if has_val else None
        rec = EpochRecord(epoch, float(np.sum(losses) / len(x)), train_top1, val_top1)
        result.history.append(rec)
        log.info("epoch %d loss %.4f train %.3f val %s", epoch, rec.loss, train_top1, val_top1)
        score = val_top1 if has_val else train_top1
        if score > best:
            best, stale = score, 0
            result.weights = model.state()
            result.best_epoch = epoch
        else:
            stale += 1
            if stale >= hp.patience:
                break
        if hp.max_steps is not None and steps >= hp.max_steps:
            break
    model.load_state(result.weights)
    result.steps = steps
    return result


def overfit(model: Network, x: np.ndarray, y: np.ndarray, steps: int = 500, lr: float = 1e-3,
            seed: int = 0) -> tuple[int, float]:
    """Full-batch training on a tiny set; returns (steps used, final train accuracy)."""
    hp = Hyperparams(lr=lr, batch_size=len(x))
    state = AdamState()
    base = Prng(seed, TRAIN_STREAM)
    acc = 0.0
    for step in range(1, steps + 1):
        _, _, state = train_step(model, x, y, hp, state, base.child(3, step))
        acc = top_k_from_scores(predict(model, x), y, 1)
        if acc == 1.0:
            return step, acc
    return steps, acc
