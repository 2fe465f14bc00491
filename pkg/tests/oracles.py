"""Independent reference implementations used by the tests."""
from __future__ import annotations

import numpy as np


def numeric_grad(f, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of scalar ``f`` at float64 ``x``."""
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        fp = f(x)
        x[i] = old - h
        fm = f(x)
        x[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def rel_error(a: np.ndarray, b: np.ndarray) -> float:
    a, b = np.asarray(a, np.float64), np.asarray(b, np.float64)
    denom = max(np.linalg.norm(a), np.linalg.norm(b), 1e-8)
    return float(np.linalg.norm(a - b) / denom)


def conv2d_loops(x, k, stride=1, pad=(0, 0, 0, 0)):
    """Direct nested-loop cross-correlation; pad = (top, bottom, left, right)."""
    n, c, h, w = x.shape
    f, _, kh, kw = k.shape
    xp = np.zeros((n, c, h + pad[0] + pad[1], w + pad[2] + pad[3]))
    xp[:, :, pad[0]:pad[0] + h, pad[2]:pad[2] + w] = x
    oh = (xp.shape[2] - kh) // stride + 1
    ow = (xp.shape[3] - kw) // stride + 1
    out = np.zeros((n, f, oh, ow))
    for b in range(n):
        for o in range(f):
            for i in range(oh):
                for j in range(ow):
                    patch = xp[b, :, i * stride:i * stride + kh, j * stride:j * stride + kw]
                    out[b, o, i, j] = np.sum(patch * k[o])
    return out


def ssim_loops(a, b, window, k1=0.01, k2=0.03, L=1.0):
    """Mean SSIM of 2-D arrays over all valid window positions, by explicit loops."""
    c1, c2 = (k1 * L) ** 2, (k2 * L) ** 2
    n = window.shape[0]
    vals = []
    for i in range(a.shape[0] - n + 1):
        for j in range(a.shape[1] - n + 1):
            pa, pb = a[i:i + n, j:j + n], b[i:i + n, j:j + n]
            ma, mb = np.sum(window * pa), np.sum(window * pb)
            va = np.sum(window * (pa - ma) ** 2)
            vb = np.sum(window * (pb - mb) ** 2)
            cov = np.sum(window * (pa - ma) * (pb - mb))
            vals.append(((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2)))
    return float(np.mean(vals))


def principal_angle(mask: np.ndarray) -> float:
    """Orientation (degrees from vertical, counter-clockwise positive) of the mask's major axis."""
    ys, xs = np.nonzero(mask > 0.5)
    w = mask[ys, xs]
    x = xs - np.average(xs, weights=w)
    y = ys - np.average(ys, weights=w)
    cxx, cyy, cxy = np.average(x * x, weights=w), np.average(y * y, weights=w), np.average(x * y, weights=w)
    # major axis angle in image coords (y down), measured from the x axis
    theta = 0.5 * np.arctan2(2 * cxy, cxx - cyy)
    # image y points down, so a counter-clockwise tilt has a negative angle here
    ang = -(90.0 + np.degrees(theta))
    if ang < -90:
        ang += 180
    return float(ang)
