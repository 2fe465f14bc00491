"""Additive Gaussian and impulse noise."""
from __future__ import annotations

import numpy as np

from degbench.imaging import check_image
from degbench.rng import Prng


def _check_sigma(sigma: float) -> None:
    if not sigma >= 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")


def awgn_shared_field(shape: tuple[int, int], sigma: float, rng: Prng) -> np.ndarray:
    """One HxW zero-mean field, to be added to every channel."""
    _check_sigma(sigma)
    return rng.normal(size=shape, scale=sigma)


def apply_awgn_shared(img: np.ndarray, sigma: float, rng: Prng) -> np.ndarray:
    img = check_image(img)
    _check_sigma(sigma)
    if sigma == 0:
        return img.copy()
    field = awgn_shared_field(img.shape[:2], sigma, rng)
    return np.clip(img + field[:, :, None], 0.0, 1.0)


def apply_awgn_per_channel(img: np.ndarray, sigma: float, rng: Prng) -> np.ndarray:
    """Independent noise per channel (the "colored Gaussian" variant)."""
    img = check_image(img)
    _check_sigma(sigma)
    if sigma == 0:
        return img.copy()
    field = rng.normal(size=img.shape, scale=sigma)
    return np.clip(img + field, 0.0, 1.0)


def salt_pepper_mask(height: int, width: int, d: float, rng: Prng) -> tuple[np.ndarray, np.ndarray]:
    """Flat pixel indices to corrupt and the value (0 or 1) each receives."""
    n = height * width
    count = int(round(d * n))
    idx = rng.choice_without_replacement(n, count)
    values = rng.random_bits(size=count).astype(np.float64)
    return idx, values


def apply_salt_pepper(img: np.ndarray, d: float, rng: Prng) -> np.ndarray:
    """Replace ``round(d*H*W)`` distinct pixel locations with black or white (all channels)."""
    img = check_image(img)
    if not 0.0 <= d <= 1.0:
        raise ValueError(f"salt-and-pepper density must be in [0, 1], got {d}")
    out = img.copy()
    if d == 0:
        return out
    h, w, _ = img.shape
    idx, values = salt_pepper_mask(h, w, d, rng)
    flat = out.reshape(h * w, 3)
    flat[idx] = values[:, None]
    return out
