"""Image validation, 8-bit file IO and bilinear resizing.

Images are ``(H, W, 3)`` float64 arrays with values in [0, 1].
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image as PILImage


class ImageError(ValueError):
    pass


def check_image(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ImageError(f"expected an HxWx3 image, got shape {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ImageError("image must be non-empty")
    if not np.all(np.isfinite(img)):
        raise ImageError("image contains non-finite values")
    return img


def to_uint8(img: np.ndarray) -> np.ndarray:
    return np.clip(np.round(np.asarray(img, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def from_uint8(arr: np.ndarray) -> np.ndarray:
    return np.asarray(arr, dtype=np.float64) / 255.0


def read_image(path: str | Path) -> np.ndarray:
    """Load PNG/PPM/JPEG as RGB in [0, 1]."""
    with PILImage.open(path) as im:
        return from_uint8(np.asarray(im.convert("RGB")))


def write_image(path: str | Path, img: np.ndarray) -> None:
    """Write PNG or binary PPM (P6) depending on the suffix."""
    path = Path(path)
    suffix = path.suffix.lower()
    arr = to_uint8(check_image(img))
    if suffix == ".ppm":
        h, w, _ = arr.shape
        with open(path, "wb") as fh:
            fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
            fh.write(arr.tobytes())
        return
    if suffix != ".png":
        raise ImageError(f"unsupported image format {suffix!r}; use .png or .ppm")
    # no timestamps or text chunks, so identical pixels give identical bytes
    PILImage.fromarray(arr, mode="RGB").save(path, format="PNG", optimize=False, compress_level=6)


def _axis_weights(src: int, dst: int):
    # half-pixel centres, edge clamped
    pos = (np.arange(dst) + 0.5) * (src / dst) - 0.5
    pos = np.clip(pos, 0, src - 1)
    lo = np.floor(pos).astype(np.int64)
    hi = np.minimum(lo + 1, src - 1)
    frac = pos - lo
    return lo, hi, frac


def resize_bilinear(img: np.ndarray, height: int, width: int | None = None) -> np.ndarray:
    """Bilinear resample of an HxWxC (or HxW) array to ``height x width``."""
    width = height if width is None else width
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape[:2]
    if (h, w) == (height, width):
        return img.copy()
    r0, r1, fr = _axis_weights(h, height)
    c0, c1, fc = _axis_weights(w, width)
    extra = (None,) * (img.ndim - 2)
    fr = fr[(slice(None), None) + extra]
    fc = fc[(None, slice(None)) + extra]
    top = img[r0][:, c0] * (1 - fc) + img[r0][:, c1] * fc
    bot = img[r1][:, c0] * (1 - fc) + img[r1][:, c1] * fc
    return top * (1 - fr) + bot * fr
