"""SSIM, PSNR, top-k accuracy and min-max map normalization."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class SsimParams:
    window: int = 11
    sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    data_range: float = 1.0
    gaussian: bool = True

    def __post_init__(self):
        if self.k1 <= 0 or self.k2 <= 0:
            raise ValueError("K1 and K2 must be positive")
        if self.window < 1:
            raise ValueError("window must be positive")

    def kernel_1d(self) -> np.ndarray:
        if not self.gaussian:
            return np.full(self.window, 1.0 / self.window)
        x = np.arange(self.window) - (self.window - 1) / 2.0
        g = np.exp(-(x * x) / (2.0 * self.sigma ** 2))
        return g / g.sum()


def _filter_valid(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    k = g.size
    rows = np.lib.stride_tricks.sliding_window_view(x, k, axis=0) @ g
    return np.lib.stride_tricks.sliding_window_view(rows, k, axis=1) @ g


def ssim_map(a: np.ndarray, b: np.ndarray, params: SsimParams = SsimParams()) -> np.ndarray:
    """Local SSIM over the fully covered (valid) window positions of two 2-D maps."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    g = params.kernel_1d()
    c1 = (params.k1 * params.data_range) ** 2
    c2 = (params.k2 * params.data_range) ** 2
    mu_a = _filter_valid(a, g)
    mu_b = _filter_valid(b, g)
    var_a = _filter_valid(a * a, g) - mu_a * mu_a
    var_b = _filter_valid(b * b, g) - mu_b * mu_b
    cov = _filter_valid(a * b, g) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return num / den


def mean_ssim(a: np.ndarray, b: np.ndarray, params: SsimParams = SsimParams()) -> float:
    """Mean SSIM; HxWxC inputs are scored per channel and averaged."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"SSIM shape mismatch: {a.shape} vs {b.shape}")
    if a.ndim not in (2, 3):
        raise ValueError(f"SSIM expects a 2-D map or HxWxC image, got shape {a.shape}")
    if min(a.shape[:2]) < params.window:
        raise ValueError(f"SSIM needs sides >= {params.window}, got {a.shape[:2]}")
    if a.ndim == 2:
        return float(ssim_map(a, b, params).mean())
    return float(np.mean([ssim_map(a[..., c], b[..., c], params).mean() for c in range(a.shape[2])]))


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; ``math.inf`` for identical inputs."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"PSNR shape mismatch: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def normalize_map(m: np.ndarray) -> np.ndarray:
    """Min-max scale to [0, 1]; constant maps become 0.5 everywhere."""
    m = np.asarray(m, dtype=np.float64)
    lo, hi = m.min(), m.max()
    if hi == lo:
        return np.full(m.shape, 0.5)
    return (m - lo) / (hi - lo)


@dataclass(frozen=True)
class EvalRecord:
    sample_id: str | int
    true_label: int
    scores: tuple[float, ...]

    def ranking(self) -> np.ndarray:
        return rank_classes(np.asarray(self.scores, dtype=np.float64)[None])[0]


def rank_classes(scores: np.ndarray) -> np.ndarray:
    """Class indices by descending score; ties go to the lower class index."""
    scores = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    return np.argsort(-scores, axis=-1, kind="stable")


def top_k_from_scores(scores: np.ndarray, labels: Sequence[int], k: int) -> float:
    scores = np.asarray(scores)
    labels = np.asarray(labels)
    if scores.shape[0] == 0:
        raise ValueError("top-k accuracy of an empty set")
    if not 1 <= k <= scores.shape[1]:
        raise ValueError(f"k must be in [1, {scores.shape[1]}], got {k}")
    ranked = rank_classes(scores)[:, :k]
    return float(np.mean(np.any(ranked == labels[:, None], axis=1)))


def top_k_accuracy(records: Sequence[EvalRecord], k: int) -> float:
    if not records:
        raise ValueError("top-k accuracy of an empty record list")
    scores = np.array([r.scores for r in records], dtype=np.float64)
    labels = np.array([r.true_label for r in records])
    return top_k_from_scores(scores, labels, k)


def feature_ssim(clean: np.ndarray, degraded: np.ndarray, params: SsimParams = SsimParams()) -> float:
    """Mean SSIM between two (C, h, w) feature stacks, each filter normalized on its own."""
    clean = np.asarray(clean)
    degraded = np.asarray(degraded)
    if clean.shape != degraded.shape or clean.ndim != 3:
        raise ValueError(f"feature stacks must share a (C, h, w) shape, got {clean.shape} and {degraded.shape}")
    vals = [mean_ssim(normalize_map(c), normalize_map(d), params) for c, d in zip(clean, degraded)]
    return float(np.mean(vals))
