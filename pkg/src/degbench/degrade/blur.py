"""Horizontal motion blur and square Gaussian blur with replicate borders."""
from __future__ import annotations

import numpy as np
from scipy.ndimage import correlate1d

from degbench.imaging import check_image


def _odd(k: int, minimum: int, what: str) -> int:
    if int(k) != k or k < minimum or k % 2 == 0:
        raise ValueError(f"{what} must be an odd integer >= {minimum}, got {k}")
    return int(k)


def motion_blur_kernel(k_m: int) -> np.ndarray:
    """1 x k_m box kernel, every tap 1/k_m."""
    k_m = _odd(k_m, 1, "motion blur width")
    return np.full((1, k_m), 1.0 / k_m)


def gaussian_blur_sigma(k_b: int) -> float:
    """Standard deviation tied to the kernel size: 0.3*((k_b-1)*0.5 - 1) + 0.8."""
    k_b = _odd(k_b, 3, "gaussian kernel size")
    return 0.3 * ((k_b - 1) * 0.5 - 1) + 0.8


def _gaussian_1d(k_b: int, sigma: float) -> np.ndarray:
    x = np.arange(k_b) - (k_b - 1) / 2.0
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def gaussian_kernel(k_b: int) -> np.ndarray:
    """k_b x k_b Gaussian, exp(-(x^2+y^2)/(2 sigma_b^2)) sampled on the grid and normalized."""
    if k_b == 1:
        return np.ones((1, 1))
    sigma = gaussian_blur_sigma(k_b)
    x = np.arange(k_b) - (k_b - 1) / 2.0
    g = np.exp(-(x[:, None] ** 2 + x[None, :] ** 2) / (2.0 * sigma * sigma))
    return g / g.sum()


def _check_fits(img: np.ndarray, k: int) -> None:
    if k > 2 * min(img.shape[0], img.shape[1]):
        raise ValueError(f"kernel size {k} exceeds twice the image side {img.shape[:2]}")


def apply_motion_blur(img: np.ndarray, k_m: int) -> np.ndarray:
    img = check_image(img)
    kernel = motion_blur_kernel(k_m)[0]
    _check_fits(img, kernel.size)
    if kernel.size == 1:
        return img.copy()
    out = correlate1d(img, kernel, axis=1, mode="nearest")
    return np.clip(out, 0.0, 1.0)


def apply_gaussian_blur(img: np.ndarray, k_b: int) -> np.ndarray:
    """Separable evaluation of the normalized k_b x k_b Gaussian; k_b = 1 is the identity."""
    img = check_image(img)
    k_b = _odd(k_b, 1, "gaussian kernel size")
    _check_fits(img, k_b)
    if k_b == 1:
        return img.copy()
    # the normalized 2-D kernel is the outer product of the normalized 1-D one
    g = _gaussian_1d(k_b, gaussian_blur_sigma(k_b))
    out = correlate1d(img, g, axis=0, mode="nearest")
    out = correlate1d(out, g, axis=1, mode="nearest")
    return np.clip(out, 0.0, 1.0)
