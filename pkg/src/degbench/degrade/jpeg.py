"""Baseline JPEG round trip (4:2:0, Annex K tables) without the entropy coder.

Huffman coding is lossless, so the decoded pixels depend only on the colour
transform, subsampling, DCT and quantization steps reproduced here.
"""
from __future__ import annotations

import numpy as np

from degbench.imaging import check_image

LUMA_TABLE = np.array([
    [16, 11, 10, 16, 24, 40, 51, 61],
    [12, 12, 14, 19, 26, 58, 60, 55],
    [14, 13, 16, 24, 40, 57, 69, 56],
    [14, 17, 22, 29, 51, 87, 80, 62],
    [18, 22, 37, 56, 68, 109, 103, 77],
    [24, 35, 55, 64, 81, 104, 113, 92],
    [49, 64, 78, 87, 103, 121, 120, 101],
    [72, 92, 95, 98, 112, 100, 103, 99],
], dtype=np.int64)

CHROMA_TABLE = np.array([
    [17, 18, 24, 47, 99, 99, 99, 99],
    [18, 21, 26, 66, 99, 99, 99, 99],
    [24, 26, 56, 99, 99, 99, 99, 99],
    [47, 66, 99, 99, 99, 99, 99, 99],
    [99, 99, 99, 99, 99, 99, 99, 99],
    [99, 99, 99, 99, 99, 99, 99, 99],
    [99, 99, 99, 99, 99, 99, 99, 99],
    [99, 99, 99, 99, 99, 99, 99, 99],
], dtype=np.int64)


def _dct_matrix() -> np.ndarray:
    k = np.arange(8)
    m = np.cos((2 * k[None, :] + 1) * k[:, None] * np.pi / 16.0)
    m[0] *= 1.0 / np.sqrt(2.0)
    return m * 0.5


DCT = _dct_matrix()


def scaled_table(base: np.ndarray, q: int) -> np.ndarray:
    """Quantization table for quality ``q`` using the usual 5000/q, 200-2q law."""
    if not 0 <= q <= 100:
        raise ValueError(f"JPEG quality must be in [0, 100], got {q}")
    q = max(int(q), 1)
    scale = 5000 // q if q < 50 else 200 - 2 * q
    return np.clip((base * scale + 50) // 100, 1, 255)


def _round_half_away(x: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def _blocks(plane: np.ndarray) -> np.ndarray:
    h, w = plane.shape
    return plane.reshape(h // 8, 8, w // 8, 8).transpose(0, 2, 1, 3)


def _unblocks(blocks: np.ndarray) -> np.ndarray:
    bh, bw = blocks.shape[:2]
    return blocks.transpose(0, 2, 1, 3).reshape(bh * 8, bw * 8)


def quantize_plane(plane: np.ndarray, table: np.ndarray) -> np.ndarray:
    """Level shift, forward DCT, quantize, dequantize, inverse DCT; sides multiple of 8."""
    b = _blocks(plane - 128.0)
    coef = DCT @ b @ DCT.T
    coef = _round_half_away(coef / table) * table
    rec = DCT.T @ coef @ DCT
    return _unblocks(rec) + 128.0


def rgb_to_ycbcr(rgb: np.ndarray) -> np.ndarray:
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = -0.168736 * r - 0.331264 * g + 0.5 * b + 128.0
    cr = 0.5 * r - 0.418688 * g - 0.081312 * b + 128.0
    return np.stack([y, cb, cr], axis=-1)


def ycbcr_to_rgb(ycc: np.ndarray) -> np.ndarray:
    y, cb, cr = ycc[..., 0], ycc[..., 1] - 128.0, ycc[..., 2] - 128.0
    r = y + 1.402 * cr
    g = y - 0.344136 * cb - 0.714136 * cr
    b = y + 1.772 * cb
    return np.stack([r, g, b], axis=-1)


def _downsample(plane: np.ndarray) -> np.ndarray:
    h, w = plane.shape
    return plane.reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3))


def _upsample_axis(p: np.ndarray, axis: int) -> np.ndarray:
    # triangle filter: each output sample is 3/4 nearest + 1/4 next-nearest input
    p = np.moveaxis(p, axis, 0)
    prev = np.concatenate([p[:1], p[:-1]])
    nxt = np.concatenate([p[1:], p[-1:]])
    even = 0.75 * p + 0.25 * prev
    odd = 0.75 * p + 0.25 * nxt
    out = np.empty((2 * p.shape[0],) + p.shape[1:], dtype=p.dtype)
    out[0::2] = even
    out[1::2] = odd
    return np.moveaxis(out, 0, axis)


def _upsample(plane: np.ndarray) -> np.ndarray:
    return _upsample_axis(_upsample_axis(plane, 0), 1)


def apply_jpeg(img: np.ndarray, q: int) -> np.ndarray:
    """Encode/decode ``img`` at quality ``q``; q = 0 behaves like q = 1."""
    img = check_image(img)
    luma_q = scaled_table(LUMA_TABLE, q)
    chroma_q = scaled_table(CHROMA_TABLE, q)
    h, w, _ = img.shape
    px = np.clip(np.round(img * 255.0), 0, 255)
    ph, pw = -(-h // 16) * 16, -(-w // 16) * 16
    px = np.pad(px, ((0, ph - h), (0, pw - w), (0, 0)), mode="edge")

    ycc = rgb_to_ycbcr(px)
    y = quantize_plane(ycc[..., 0], luma_q)
    cb = quantize_plane(_downsample(ycc[..., 1]), chroma_q)
    cr = quantize_plane(_downsample(ycc[..., 2]), chroma_q)
    # decoders clamp every plane to 8 bits
    y = np.clip(np.round(y), 0, 255)
    cb = np.clip(np.round(cb), 0, 255)
    cr = np.clip(np.round(cr), 0, 255)
    rec = np.stack([y, _upsample(cb), _upsample(cr)], axis=-1)
    rgb = np.clip(np.round(ycbcr_to_rgb(rec)), 0, 255)
    return rgb[:h, :w] / 255.0
