"""Single-core experiment settings shared by the acceptance suite and the scripts."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from degbench.data import DatasetManifest, SynthDigitConfig, generate_synthetic_digits, kfold_split, \
    train_test_for_fold
from degbench.harness.sweep import to_model_input
from degbench.metrics import top_k_from_scores
from degbench.models import Hyperparams, Network, build_named, predict, train
from degbench.models.checkpoint import load_model, save_model

log = logging.getLogger(__name__)

# glyphs narrowed to the upper half of the size range so they survive a 64 px canvas
DESK_DIGITS = SynthDigitConfig(per_class=200, canvas=64, font_size=(90.0, 240.0), seed=0)
DESK_FOLDS = 6
DESK_FOLD = 0

MODEL_SIDES = {
    "capsnet": 64, "capsnet_r1": 64, "vcapsnet_mini": 48,
    "small_cnn_shallow": 32, "small_cnn_shallow+ntt": 32, "small_cnn_deep": 32,
}


# 8-point sweeps spanning the stated ranges; the trend tolerance is defined per 8 points
TREND_GRIDS = {
    "awgn": tuple(float(v) for v in np.linspace(0, 1, 8)),
    "salt_pepper": tuple(float(v) for v in np.linspace(0, 1, 8)),
    "gaussian_blur": (3, 9, 17, 23, 31, 37, 45, 51),
}


def desk_hyperparams(side: int) -> Hyperparams:
    # slow capsule warm-up needs a longer patience than the library default
    return Hyperparams(epochs=30, patience=10, shift=max(1, side // 16), permute_channels=True)


@dataclass
class DeskData:
    manifest: DatasetManifest
    x_train: np.ndarray  # native-resolution HWC images
    y_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray
    tag: str


def prepare_digits(root: str | Path, cfg: SynthDigitConfig = DESK_DIGITS) -> DeskData:
    root = Path(root)
    if (root / "manifest.tsv").exists():
        manifest = DatasetManifest.load(root)
    else:
        manifest = kfold_split(generate_synthetic_digits(cfg, root), DESK_FOLDS, 0)
        manifest.save()
    tr, te = train_test_for_fold(manifest, DESK_FOLD)
    xtr, ytr = tr.load_arrays()
    xte, yte = te.load_arrays()
    return DeskData(manifest, xtr, ytr, xte, yte, f"digits-s{cfg.seed}-c{cfg.canvas}-n{cfg.per_class}")


@dataclass
class Trained:
    model: Network
    test_top1: float
    seconds: float
    best_epoch: int


class ModelZoo:
    """Trains each (selector, seed) once; optionally persists checkpoints under ``cache``."""

    def __init__(self, data: DeskData, cache: str | Path | None = None):
        self.data = data
        self.cache = Path(cache) if cache else None
        self._models: dict[tuple[str, int], Trained] = {}

    def side(self, selector: str) -> int:
        return MODEL_SIDES[selector]

    def get(self, selector: str, seed: int) -> Trained:
        key = (selector, seed)
        if key not in self._models:
            self._models[key] = self._load(selector, seed) or self._train(selector, seed)
        return self._models[key]

    def _stem(self, selector: str, seed: int) -> Path | None:
        return self.cache / f"{selector.replace('+', '_')}_s{seed}" if self.cache else None

    def _test_top1(self, net: Network) -> float:
        side = net.cfg.input_shape[1]
        return top_k_from_scores(predict(net, to_model_input(self.data.x_test, side)), self.data.y_test, 1)

    def _load(self, selector, seed) -> Trained | None:
        stem = self._stem(selector, seed)
        if stem is None or not stem.with_suffix(".dgw").exists():
            return None
        net = load_model(stem)
        if dict(net.cfg.metadata).get("dataset") != self.data.tag:
            return None
        meta = dict(net.cfg.metadata)
        return Trained(net, self._test_top1(net), float(meta.get("train_seconds", "nan")),
                       int(meta.get("best_epoch", "0")))

    def _train(self, selector, seed) -> Trained:
        side = self.side(selector)
        cfg = build_named(selector, side, len(self.data.manifest.class_names))
        net = Network(cfg, seed=seed)
        t0 = time.perf_counter()
        res = train(net, to_model_input(self.data.x_train, side), self.data.y_train, desk_hyperparams(side),
                    seed=seed)
        seconds = time.perf_counter() - t0
        net.cfg = replace(cfg, metadata=(("dataset", self.data.tag), ("seed", str(seed)),
                                         ("best_epoch", str(res.best_epoch)), ("train_seconds", f"{seconds:.1f}")))
        out = Trained(net, self._test_top1(net), seconds, res.best_epoch)
        log.info("%s seed %d: test top1 %.3f in %.0fs", selector, seed, out.test_top1, seconds)
        stem = self._stem(selector, seed)
        if stem is not None:
            save_model(net, stem)
        return out


def trend_violations(values: Sequence[float], window: int = 8, max_inversions: int = 1,
                     max_magnitude: float = 0.02) -> list[str]:
    """Problems with a curve that should not rise as severity grows.

    Every run of ``window`` consecutive points may hold at most
    ``max_inversions`` rises, none larger than ``max_magnitude``.
    """
    v = list(values)
    rises = [(i, v[i + 1] - v[i]) for i in range(len(v) - 1) if v[i + 1] > v[i]]
    problems = [f"rise of {d:.4f} after point {i}" for i, d in rises if d > max_magnitude]
    for start in range(max(1, len(v) - window + 1)):
        inside = [i for i, _ in rises if start <= i and i + 1 < start + window]
        if len(inside) > max_inversions:
            problems.append(f"{len(inside)} rises within points {start}..{start + window - 1}")
            break
    return problems
