"""Synthetic digit generation, folder ingestion, manifests and stratified k-fold."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image as PILImage
from PIL import ImageDraw, ImageFont, UnidentifiedImageError

from degbench.imaging import read_image, resize_bilinear, write_image
from degbench.rng import Prng

log = logging.getLogger(__name__)

SAMPLE_STREAM = 0x5D16
KFOLD_STREAM = 0xF01D
IMAGE_SUFFIXES = {".png", ".ppm", ".jpg", ".jpeg", ".bmp"}
SYSTEM_FONT_DIRS = ("/usr/share/fonts", "/usr/local/share/fonts", "~/.fonts")
MANIFEST_NAME = "manifest.tsv"
LUMA = np.array([0.299, 0.587, 0.114])


class DataError(ValueError):
    pass


# ----------------------------------------------------------------- manifest

@dataclass
class DatasetManifest:
    root: Path
    class_names: list[str]
    paths: list[str] = field(default_factory=list)
    labels: list[int] = field(default_factory=list)
    folds: list[int] = field(default_factory=list)
    rejected: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.paths)

    def __post_init__(self):
        self.root = Path(self.root)
        if not self.folds:
            self.folds = [-1] * len(self.paths)
        if not len(self.paths) == len(self.labels) == len(self.folds):
            raise DataError("manifest columns have different lengths")
        bad = [l for l in self.labels if not 0 <= l < len(self.class_names)]
        if bad:
            raise DataError(f"labels out of range: {sorted(set(bad))}")

    @property
    def counts(self) -> list[int]:
        return np.bincount(np.asarray(self.labels, dtype=np.int64), minlength=len(self.class_names)).tolist()

    def subset(self, idx: Sequence[int]) -> "DatasetManifest":
        idx = list(idx)
        return DatasetManifest(self.root, list(self.class_names), [self.paths[i] for i in idx],
                               [self.labels[i] for i in idx], [self.folds[i] for i in idx])

    def save(self, path: str | Path | None = None) -> Path:
        path = Path(path) if path is not None else self.root / MANIFEST_NAME
        lines = ["#classes\t" + "\t".join(self.class_names)]
        lines += [f"{p}\t{l}\t{f}" for p, l, f in zip(self.paths, self.labels, self.folds)]
        path.write_text("\n".join(lines) + "\n")
        return path

    @classmethod
    def load(cls, path: str | Path) -> "DatasetManifest":
        path = Path(path)
        if path.is_dir():
            path = path / MANIFEST_NAME
        if not path.exists():
            raise DataError(f"manifest not found: {path}")
        lines = path.read_text().splitlines()
        if not lines or not lines[0].startswith("#classes"):
            raise DataError(f"{path}: missing '#classes' header line")
        names = lines[0].split("\t")[1:]
        paths, labels, folds = [], [], []
        for n, line in enumerate(lines[1:], 2):
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError(f"{path}:{n}: expected path<TAB>label<TAB>fold")
            paths.append(parts[0])
            labels.append(int(parts[1]))
            folds.append(int(parts[2]))
        return cls(path.parent, names, paths, labels, folds)

    def load_arrays(self, side: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Images as (N, H, W, 3) float64, optionally resized to ``side``, plus labels."""
        imgs = []
        for rel in self.paths:
            img = read_image(self.root / rel)
            if side is not None:
                img = resize_bilinear(img, side, side)
            imgs.append(img)
        return np.stack(imgs), np.asarray(self.labels, dtype=np.int64)


# ---------------------------------------------------------- synthetic digits

@dataclass(frozen=True)
class SynthDigitConfig:
    per_class: int = 1200
    canvas: int = 256
    rotation: tuple[float, float] = (-30.0, 30.0)
    font_size: tuple[float, float] = (30.0, 240.0)
    fonts: tuple[str, ...] = ()
    backgrounds: tuple[str, ...] = ()
    min_contrast: float = 0.3  # luma difference between glyph colour and background mean
    jitter: float = 0.1  # max centre offset as a fraction of the canvas side
    seed: int = 0

    def __post_init__(self):
        if self.per_class < 1:
            raise DataError("per_class must be >= 1")
        if self.rotation[0] > self.rotation[1] or self.font_size[0] > self.font_size[1]:
            raise DataError("ranges must be (low, high)")

    @property
    def classes(self) -> int:
        return 10

    def scaled_font_size(self) -> tuple[float, float]:
        # ranges are defined for a 256-pixel canvas
        if self.canvas >= 256:
            return self.font_size
        s = self.canvas / 256.0
        return self.font_size[0] * s, self.font_size[1] * s


def discover_fonts(dirs: Sequence[str | Path] = ("fonts",) + SYSTEM_FONT_DIRS) -> list[str]:
    """All .ttf/.otf files under the first directory in ``dirs`` that has any."""
    for d in dirs:
        d = Path(d).expanduser()
        if d.is_dir():
            found = sorted(str(p) for p in d.rglob("*") if p.suffix.lower() in (".ttf", ".otf"))
            if found:
                return found
    return []


@lru_cache(maxsize=256)
def _font(path: str, size: int) -> ImageFont.FreeTypeFont:
    return ImageFont.truetype(path, size)


def render_glyph(digit: int, font_path: str, size: float, angle: float) -> np.ndarray:
    """Antialiased alpha mask of ``digit`` rotated counter-clockwise by ``angle`` degrees."""
    font = _font(font_path, max(int(round(size)), 4))
    text = str(digit)
    left, top, right, bottom = font.getbbox(text)
    w, h = right - left, bottom - top
    pad = 2
    mask = PILImage.new("L", (w + 2 * pad, h + 2 * pad), 0)
    ImageDraw.Draw(mask).text((pad - left, pad - top), text, fill=255, font=font)
    mask = mask.rotate(angle, resample=PILImage.BILINEAR, expand=True)
    return np.asarray(mask, dtype=np.float64) / 255.0


def _background(cfg: SynthDigitConfig, rng: Prng, pool: list[np.ndarray]) -> np.ndarray:
    n = cfg.canvas
    if not pool:
        return np.broadcast_to(rng.uniform(size=3), (n, n, 3)).copy()
    src = pool[int(rng.integers(0, len(pool)))]
    h, w = src.shape[:2]
    if h < n or w < n:
        scale = n / min(h, w)
        src = resize_bilinear(src, int(np.ceil(h * scale)), int(np.ceil(w * scale)))
        h, w = src.shape[:2]
    y0 = int(rng.integers(0, h - n + 1))
    x0 = int(rng.integers(0, w - n + 1))
    return src[y0:y0 + n, x0:x0 + n].copy()


@dataclass(frozen=True)
class SampleInfo:
    index: int
    label: int
    font: str
    size: float
    angle: float
    color: tuple[float, float, float]
    offset: tuple[int, int]


def _place(n: int, g: int, jitter: float, rng: Prng) -> int:
    """Top-left offset putting a glyph of extent ``g`` near the centre, kept inside the canvas."""
    shift = rng.uniform(-jitter, jitter) * n
    return int(np.clip(round((n - g) / 2 + shift), 0, n - g))


def render_sample(cfg: SynthDigitConfig, index: int, fonts: Sequence[str],
                  pool: Sequence[np.ndarray] = ()) -> tuple[np.ndarray, int, SampleInfo]:
    """Draw sample ``index``: label = index mod 10; all randomness from its own stream."""
    rng = Prng(cfg.seed, SAMPLE_STREAM, (index,))
    label = index % 10
    font = fonts[int(rng.integers(0, len(fonts)))]
    lo, hi = cfg.scaled_font_size()
    size = float(rng.uniform(lo, hi))
    angle = float(rng.uniform(*cfg.rotation))
    bg = _background(cfg, rng, list(pool))
    bg_luma = float(bg.reshape(-1, 3).mean(axis=0) @ LUMA)
    # rejection keeps the colour uniform over the legible set
    color = rng.uniform(size=3)
    for _ in range(256):
        if abs(float(color @ LUMA) - bg_luma) >= cfg.min_contrast:
            break
        color = rng.uniform(size=3)

    alpha = render_glyph(label, font, size, angle)
    n = cfg.canvas
    gh, gw = alpha.shape
    if gh > n or gw > n:
        # clip oversize glyphs around their centre
        y0, x0 = max(0, (gh - n) // 2), max(0, (gw - n) // 2)
        alpha = alpha[y0:y0 + n, x0:x0 + n]
        gh, gw = alpha.shape
    oy = _place(n, gh, cfg.jitter, rng)
    ox = _place(n, gw, cfg.jitter, rng)
    img = bg
    a = alpha[:, :, None]
    img[oy:oy + gh, ox:ox + gw] = img[oy:oy + gh, ox:ox + gw] * (1 - a) + color[None, None, :] * a
    info = SampleInfo(index, label, font, size, angle, tuple(float(c) for c in color), (oy, ox))
    return np.clip(img, 0.0, 1.0), label, info


def _load_pool(paths: Sequence[str]) -> list[np.ndarray]:
    pool, bad = [], []
    for p in paths:
        try:
            pool.append(read_image(p))
        except (OSError, UnidentifiedImageError):
            bad.append(str(p))
    if bad:
        raise DataError(f"unreadable background images: {bad}")
    return pool


def _check_fonts(fonts: Sequence[str]) -> None:
    bad = []
    for f in fonts:
        try:
            _font(f, 12)
        except OSError:
            bad.append(f)
    if bad:
        raise DataError(f"unreadable fonts: {bad}")


def generate_synthetic_digits(cfg: SynthDigitConfig, root: str | Path) -> DatasetManifest:
    """Render ``10 * per_class`` PNGs under ``root/<digit>/`` and write the manifest."""
    root = Path(root)
    fonts = list(cfg.fonts) or discover_fonts()
    if not fonts:
        raise DataError("no fonts found; pass SynthDigitConfig(fonts=...) or add a fonts/ directory")
    _check_fonts(fonts)
    pool = _load_pool(cfg.backgrounds)
    names = [str(d) for d in range(10)]
    for d in names:
        (root / d).mkdir(parents=True, exist_ok=True)
    paths, labels = [], []
    for index in range(10 * cfg.per_class):
        img, label, _ = render_sample(cfg, index, fonts, pool)
        rel = f"{label}/{index:06d}.png"
        write_image(root / rel, img)
        paths.append(rel)
        labels.append(label)
    manifest = DatasetManifest(root, names, paths, labels)
    manifest.save()
    return manifest


# ----------------------------------------------------------- folder ingest

def load_image_folder(root: str | Path) -> DatasetManifest:
    """``root/<class>/<image>`` layout; classes ordered alphabetically.

    Files that cannot be decoded are skipped and listed in ``rejected``.
    """
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"dataset root {root} is not a directory")
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not class_dirs:
        raise DataError(f"no class directories under {root}")
    names, paths, labels, rejected = [], [], [], []
    for label, d in enumerate(class_dirs):
        names.append(d.name)
        kept = 0
        for f in sorted(p for p in d.iterdir() if p.is_file()):
            rel = f.relative_to(root).as_posix()
            try:
                with PILImage.open(f) as im:
                    im.verify()
            except (OSError, UnidentifiedImageError, SyntaxError):
                rejected.append(rel)
                continue
            paths.append(rel)
            labels.append(label)
            kept += 1
        if kept == 0:
            raise DataError(f"class directory {d} has no decodable images")
    if rejected:
        log.warning("skipped %d undecodable files: %s", len(rejected), rejected)
    return DatasetManifest(root, names, paths, labels, rejected=rejected)


# ------------------------------------------------------------------ k-fold

def kfold_split(manifest: DatasetManifest, k: int, seed: int = 0) -> DatasetManifest:
    """Stratified assignment of fold ids in ``[0, k)``.

    Each class is shuffled and dealt round-robin; the starting fold rotates
    with the running sample count so leftover samples spread across folds.
    """
    if k < 2:
        raise DataError("k must be >= 2")
    counts = manifest.counts
    present = [c for c in counts if c > 0]
    if not present or k > min(present):
        raise DataError(f"k={k} exceeds the smallest class count {min(present) if present else 0}")
    labels = np.asarray(manifest.labels)
    folds = np.full(len(labels), -1, dtype=np.int64)
    offset = 0
    for c in range(len(manifest.class_names)):
        idx = np.flatnonzero(labels == c)
        if idx.size == 0:
            continue
        order = idx[Prng(seed, KFOLD_STREAM, (c,)).permutation(idx.size)]
        folds[order] = (offset + np.arange(idx.size)) % k
        offset += idx.size
    return replace(manifest, folds=folds.tolist(), rejected=list(manifest.rejected))


def train_test_for_fold(manifest: DatasetManifest, fold: int) -> tuple[DatasetManifest, DatasetManifest]:
    folds = np.asarray(manifest.folds)
    if np.any(folds < 0):
        raise DataError("manifest has no fold assignment; run kfold_split first")
    if fold not in set(folds.tolist()):
        raise DataError(f"fold {fold} not present")
    test = np.flatnonzero(folds == fold)
    train = np.flatnonzero(folds != fold)
    return manifest.subset(train), manifest.subset(test)
