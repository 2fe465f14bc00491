"""Degradation sweeps: corrupt at native resolution, resize, classify."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from degbench import degrade
from degbench.imaging import resize_bilinear
from degbench.metrics import top_k_from_scores
from degbench.models.network import Network, predict
from degbench.rng import Prng

SWEEP_STREAM = 0x5EE9
# stable ids so a degradation's noise stream does not depend on grid ordering
DEGRADATION_IDS = {name: i for i, name in enumerate(
    ("awgn", "awgn_color", "salt_pepper", "motion_blur", "gaussian_blur", "jpeg"))}
CSV_HEADER = "model,degradation,param,top1,top3,n,seed"


class SweepError(ValueError):
    pass


def thread_count() -> int:
    raw = os.environ.get("DEGBENCH_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise SweepError(f"DEGBENCH_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


@dataclass(frozen=True)
class SweepResult:
    model: str
    degradation: str
    param: float
    top1: float
    top3: float
    n: int
    seed: int

    def __post_init__(self):
        if not 0.0 <= self.top1 <= self.top3 <= 1.0:
            raise SweepError(f"inconsistent accuracies top1={self.top1} top3={self.top3}")

    def csv_row(self) -> str:
        return f"{self.model},{self.degradation},{_num(self.param)},{self.top1:.6f},{self.top3:.6f},{self.n},{self.seed}"


def _num(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def to_model_input(images: Sequence[np.ndarray], side: int) -> np.ndarray:
    """(N, H, W, 3) images in [0, 1] to a float32 (N, 3, side, side) batch."""
    out = np.empty((len(images), 3, side, side), dtype=np.float32)
    for i, img in enumerate(images):
        if img.shape[0] != side or img.shape[1] != side:
            img = resize_bilinear(img, side, side)
        out[i] = img.transpose(2, 0, 1)
    return out


def image_stream(seed: int, degradation: str, point: int, index: int) -> Prng:
    return Prng(seed, SWEEP_STREAM, (DEGRADATION_IDS[degradation], point, index))


def degrade_images(images: Sequence[np.ndarray], spec, seed: int, point: int,
                   threads: int | None = None) -> list[np.ndarray]:
    """Apply ``spec`` to every image with its own (seed, grid point, index) noise stream."""
    threads = thread_count() if threads is None else threads

    def one(i: int) -> np.ndarray:
        return degrade.apply(spec, images[i], image_stream(seed, spec.name, point, i))

    if threads <= 1:
        return [one(i) for i in range(len(images))]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, range(len(images))))


def degraded_batch(images, spec, seed: int, point: int, side: int, threads: int | None = None) -> np.ndarray:
    """Apply-then-resize: the corruption happens at native resolution."""
    return to_model_input(degrade_images(images, spec, seed, point, threads), side)


def evaluate(model: Network, x: np.ndarray, labels: np.ndarray) -> tuple[float, float]:
    scores = predict(model, x)
    k3 = min(3, scores.shape[1])
    return top_k_from_scores(scores, labels, 1), top_k_from_scores(scores, labels, k3)


def sweep_points(grids: dict[str, Iterable[float]]) -> list[tuple[str, int, float]]:
    return [(name, i, float(v)) for name, values in grids.items() for i, v in enumerate(values)]


def run_degradation_sweep(model: Network, images: Sequence[np.ndarray], labels: np.ndarray,
                          grids: dict[str, Sequence[float]], seed: int = 0, model_id: str | None = None,
                          threads: int | None = None,
                          on_row: Callable[[SweepResult], None] | None = None) -> list[SweepResult]:
    """One row per grid point, in grid order."""
    if len(images) == 0:
        raise SweepError("empty evaluation set")
    labels = np.asarray(labels)
    side = model.cfg.input_shape[1]
    model_id = model_id or model.cfg.name
    rows = []
    for name, point, value in sweep_points(grids):
        spec = degrade.make_spec(name, value)
        x = degraded_batch(images, spec, seed, point, side, threads)
        top1, top3 = evaluate(model, x, labels)
        row = SweepResult(model_id, name, value, top1, top3, len(images), seed)
        rows.append(row)
        if on_row is not None:
            on_row(row)
    return rows


class CsvSink:
    """Single writer that appends rows as they are produced.

    The first line records the config hash as a ``#`` comment, followed by
    the header row.
    """

    def __init__(self, path: str | Path, header: str = CSV_HEADER, config_hash: str | None = None):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("w", newline="\n") as fh:
            if config_hash is not None:
                fh.write(f"# config_sha256={config_hash}\n")
            fh.write(header + "\n")

    def write(self, row) -> None:
        with self.path.open("a", newline="\n") as fh:
            fh.write(row.csv_row() + "\n")


def read_csv(path: str | Path) -> tuple[list[str], list[dict[str, str]]]:
    """Header columns and rows; ``#`` comment lines are skipped."""
    lines = [l for l in Path(path).read_text().splitlines() if l and not l.startswith("#")]
    if not lines:
        raise SweepError(f"{path}: no header row")
    header = lines[0].split(",")
    rows = []
    for l in lines[1:]:
        parts = l.split(",")
        if len(parts) != len(header):
            raise SweepError(f"{path}: malformed row {l!r}")
        rows.append(dict(zip(header, parts)))
    return header, rows
