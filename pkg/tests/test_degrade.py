import numpy as np
import pytest
from concurrent.futures import ThreadPoolExecutor
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from degbench import degrade
from degbench.degrade import (
    apply_awgn_per_channel, apply_awgn_shared, apply_gaussian_blur, apply_jpeg, apply_motion_blur,
    apply_salt_pepper, gaussian_blur_sigma, gaussian_kernel, motion_blur_kernel,
)
from degbench.degrade.jpeg import scaled_table, LUMA_TABLE
from degbench.degrade.noise import awgn_shared_field
from degbench.metrics import mean_ssim
from degbench.rng import Prng

images = hnp.arrays(np.float64, st.tuples(st.integers(4, 20), st.integers(4, 20), st.just(3)),
                    elements=st.floats(0, 1))


def natural_like(seed: int, side: int = 64) -> np.ndarray:
    """Smooth random field plus edges: a stand-in for a natural image."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:side, 0:side] / side
    img = np.zeros((side, side, 3))
    for c in range(3):
        f = rng.uniform(1, 4, 2)
        ph = rng.uniform(0, 2 * np.pi, 2)
        img[..., c] = 0.5 + 0.25 * np.sin(2 * np.pi * f[0] * xx + ph[0]) * np.cos(2 * np.pi * f[1] * yy + ph[1])
    b = side // 4
    x0, y0 = rng.integers(0, side - b, 2)
    img[y0:y0 + b, x0:x0 + b] = rng.uniform(0, 1, 3)
    return np.clip(img, 0, 1)


# --------------------------------------------------------------- identities

@pytest.mark.parametrize("spec", [
    degrade.AwgnShared(0.0), degrade.AwgnPerChannel(0.0), degrade.SaltPepper(0.0),
    degrade.MotionBlur(1), degrade.GaussianBlur(1),
])
def test_zero_severity_is_identity(spec):
    img = natural_like(0)
    out = degrade.apply(spec, img, Prng(0))
    assert np.array_equal(out, img)
    assert degrade.is_identity(spec)


def test_jpeg_at_highest_quality_is_near_lossless():
    # no zero-severity point exists for JPEG; the least lossy setting is checked instead
    yy, xx = np.mgrid[0:64, 0:64] / 63.0
    grad = np.stack([xx, yy, (xx + yy) / 2], axis=-1)
    assert mean_ssim(apply_jpeg(grad, 100), grad) > 0.98


# ---------------------------------------------------------------- AWGN

def test_awgn_shared_same_field_on_all_channels():
    img = np.full((64, 64, 3), 0.5)
    img[..., 0] = 0.45
    img[..., 2] = 0.55
    out = apply_awgn_shared(img, 0.02, Prng(1))
    d = out - img  # no clipping at this sigma (checked below)
    assert np.all((out > 0) & (out < 1))
    np.testing.assert_allclose(d[..., 0], d[..., 1], atol=1e-12)
    np.testing.assert_allclose(d[..., 1], d[..., 2], atol=1e-12)


def test_awgn_shared_channel_differences_invariant():
    rng = np.random.default_rng(0)
    img = rng.uniform(0.3, 0.7, (50, 50, 3))
    out = apply_awgn_shared(img, 0.01, Prng(2))
    np.testing.assert_allclose(out[..., 0] - out[..., 1], img[..., 0] - img[..., 1], atol=1e-12)


def test_awgn_shared_sigma_statistic():
    img = np.full((100, 100, 3), 0.5)
    out = apply_awgn_shared(img, 0.25, Prng(3))
    d = (out - img)[..., 0]
    unclipped = (out[..., 0] > 0) & (out[..., 0] < 1)
    field = awgn_shared_field((100, 100), 0.25, Prng(3))
    assert abs(np.std(field) - 0.25) < 0.01
    assert abs(np.std(d[unclipped]) - 0.25) < 0.03  # clipped tails removed, slightly narrower


def test_awgn_per_channel_fields_uncorrelated():
    img = np.full((100, 100, 3), 0.5)
    d = (apply_awgn_per_channel(img, 0.05, Prng(4)) - img).reshape(-1, 3)
    c = np.corrcoef(d.T)
    assert max(abs(c[0, 1]), abs(c[0, 2]), abs(c[1, 2])) < 0.05


def test_awgn_per_channel_breaks_gray():
    img = np.full((32, 32, 3), 0.5)
    out = apply_awgn_per_channel(img, 0.5, Prng(5))
    assert np.max(np.abs(out[..., 0] - out[..., 1])) > 0


@pytest.mark.parametrize("fn", [apply_awgn_shared, apply_awgn_per_channel])
def test_awgn_negative_sigma_rejected(fn):
    with pytest.raises(ValueError):
        fn(np.zeros((4, 4, 3)), -0.1, Prng(0))


# ---------------------------------------------------------- salt & pepper

def test_salt_pepper_exact_count():
    img = np.full((256, 256, 3), 0.5)
    out = apply_salt_pepper(img, 0.1, Prng(6))
    changed = np.any(out != img, axis=-1)
    assert changed.sum() == round(0.1 * 65536)
    vals = out[changed]
    assert np.all((vals == 0) | (vals == 1))
    assert np.all(vals.min(axis=1) == vals.max(axis=1))  # all channels together


@given(st.floats(0, 1), st.integers(0, 2**31))
def test_salt_pepper_count_property(d, seed):
    img = np.full((17, 23, 3), 0.5)
    out = apply_salt_pepper(img, d, Prng(seed))
    assert np.any(out != img, axis=-1).sum() == round(d * 17 * 23)


def test_salt_pepper_full_density_binary():
    out = apply_salt_pepper(natural_like(1, 32), 1.0, Prng(7))
    assert np.all((out == 0) | (out == 1))


def test_salt_pepper_roughly_balanced():
    out = apply_salt_pepper(np.full((100, 100, 3), 0.5), 1.0, Prng(8))
    assert abs(out[..., 0].mean() - 0.5) < 0.03


@pytest.mark.parametrize("d", [-0.1, 1.1])
def test_salt_pepper_density_range(d):
    with pytest.raises(ValueError):
        apply_salt_pepper(np.zeros((4, 4, 3)), d, Prng(0))


# ------------------------------------------------------------------ blur

def test_gaussian_sigma_formula():
    assert abs(gaussian_blur_sigma(3) - 0.8) < 1e-12
    assert abs(gaussian_blur_sigma(5) - 1.1) < 1e-12
    assert abs(gaussian_blur_sigma(51) - 8.0) < 1e-12


@pytest.mark.parametrize("k", [2, 1, 0, -3])
def test_gaussian_sigma_rejects_invalid(k):
    with pytest.raises(ValueError):
        gaussian_blur_sigma(k)


def test_motion_kernels():
    np.testing.assert_array_equal(motion_blur_kernel(1), [[1.0]])
    np.testing.assert_allclose(motion_blur_kernel(3), [[1 / 3] * 3])
    assert abs(motion_blur_kernel(31).sum() - 1) < 1e-12
    for bad in (0, 2, -1):
        with pytest.raises(ValueError):
            motion_blur_kernel(bad)


@pytest.mark.parametrize("k", range(3, 52, 2))
def test_blur_kernels_sum_to_one(k):
    assert abs(gaussian_kernel(k).sum() - 1) < 1e-9
    assert abs(motion_blur_kernel(k if k <= 31 else 31).sum() - 1) < 1e-9


def test_gaussian_kernel_matches_formula_grid():
    s = gaussian_blur_sigma(3)
    r = np.arange(-1, 2)
    g = np.exp(-(r[:, None] ** 2 + r[None, :] ** 2) / (2 * s * s))
    g /= g.sum()
    img = np.zeros((9, 9, 3))
    img[4, 4] = 1.0
    out = apply_gaussian_blur(img, 3)
    np.testing.assert_allclose(out[3:6, 3:6, 0], g, atol=1e-12)


def test_motion_blur_is_horizontal():
    img = np.zeros((9, 9, 3))
    img[4, 4] = 1.0
    out = apply_motion_blur(img, 3)
    np.testing.assert_allclose(out[4, 3:6, 1], [1 / 3] * 3, atol=1e-12)
    assert out[3, 4, 1] == 0 and out[5, 4, 1] == 0


@pytest.mark.parametrize("fn,k", [(apply_gaussian_blur, 7), (apply_motion_blur, 9)])
def test_blur_keeps_constant_images(fn, k):
    img = np.full((12, 15, 3), 0.3)
    np.testing.assert_allclose(fn(img, k), img, atol=1e-12)


def test_blur_rejects_oversize_kernel():
    with pytest.raises(ValueError):
        apply_gaussian_blur(np.zeros((5, 5, 3)), 11)


# ------------------------------------------------------------------ JPEG

def test_jpeg_quality_scaling_law():
    np.testing.assert_array_equal(scaled_table(LUMA_TABLE, 50), LUMA_TABLE)
    assert scaled_table(LUMA_TABLE, 100).max() == 1
    t10 = scaled_table(LUMA_TABLE, 10)
    np.testing.assert_array_equal(t10, np.clip((LUMA_TABLE * 500 + 50) // 100, 1, 255))
    np.testing.assert_array_equal(scaled_table(LUMA_TABLE, 0), scaled_table(LUMA_TABLE, 1))


def test_jpeg_q30_beats_q1_on_ten_images():
    for seed in range(10):
        img = natural_like(seed)
        assert mean_ssim(apply_jpeg(img, 30), img) > mean_ssim(apply_jpeg(img, 1), img)


@pytest.mark.parametrize("q", [50, 75, 100])
def test_jpeg_flat_block_roundtrip_high_quality(q):
    for level in (0.2, 0.5, 0.8):
        img = np.full((8, 8, 3), level)
        out = apply_jpeg(img, q)
        assert np.max(np.abs(out - np.round(level * 255) / 255)) <= 1 / 255 + 1e-12


def test_jpeg_flat_block_error_bounded_by_dc_step():
    # At low q the DC step exceeds 2 levels, so only the analytic bound holds.
    for q in (0, 1, 10, 30):
        step = scaled_table(LUMA_TABLE, q)[0, 0]
        for level in (0.2, 0.5, 0.8):
            out = apply_jpeg(np.full((8, 8, 3), level), q)
            assert np.ptp(out) == 0  # still flat
            assert np.max(np.abs(out - level)) * 255 <= step / 16 + 1.5


def test_jpeg_mid_gray_flat_exact_at_any_quality():
    img = np.full((8, 8, 3), 128 / 255)
    for q in range(0, 101, 10):
        assert np.max(np.abs(apply_jpeg(img, q) - img)) <= 1 / 255 + 1e-12


@pytest.mark.parametrize("q", [-1, 101])
def test_jpeg_quality_range(q):
    with pytest.raises(ValueError):
        apply_jpeg(np.zeros((8, 8, 3)), q)


def test_jpeg_arbitrary_size():
    img = natural_like(3, 37)[:, :29]
    assert apply_jpeg(img, 20).shape == img.shape


# ----------------------------------------------------------- properties

SPECS = [degrade.AwgnShared(0.3), degrade.AwgnPerChannel(0.6), degrade.SaltPepper(0.4),
         degrade.MotionBlur(5), degrade.GaussianBlur(5), degrade.JpegQuality(10)]


@given(images, st.sampled_from(SPECS), st.integers(0, 2**31))
def test_outputs_valid_and_deterministic(img, spec, seed):
    if spec.param > 2 * min(img.shape[:2]) and spec.name.endswith("blur"):
        return
    a = degrade.apply(spec, img, Prng(seed))
    b = degrade.apply(spec, img, Prng(seed))
    assert a.shape == img.shape
    assert a.min() >= 0 and a.max() <= 1
    assert a.tobytes() == b.tobytes()


def test_parallel_matches_serial_bytes():
    imgs = [natural_like(s, 32) for s in range(12)]

    def run(i, spec):
        return degrade.apply(spec, imgs[i], Prng(9, 1, (i,))).tobytes()

    for spec in SPECS:
        serial = [run(i, spec) for i in range(len(imgs))]
        with ThreadPoolExecutor(4) as pool:
            par = list(pool.map(lambda i: run(i, spec), range(len(imgs))))
        assert serial == par


@pytest.mark.parametrize("name,grid", [
    ("awgn", np.linspace(0, 1, 8)), ("salt_pepper", np.linspace(0, 1, 8)),
    ("gaussian_blur", [3, 5, 9, 15, 21, 31, 41, 51]), ("motion_blur", [1, 3, 7, 11, 15, 21, 25, 31]),
    ("jpeg", [30, 25, 20, 15, 10, 5, 2, 0]), ("awgn_color", np.linspace(0, 1, 8)),
])
def test_ssim_non_increasing_with_severity(name, grid):
    img = natural_like(11, 64)
    vals = [mean_ssim(degrade.apply(degrade.make_spec(name, v), img, Prng(0)), img) for v in grid]
    inversions = sum(b > a for a, b in zip(vals, vals[1:]))
    assert inversions <= 1


def test_make_spec_validation():
    with pytest.raises(ValueError):
        degrade.make_spec("fog", 1)
    with pytest.raises(ValueError):
        degrade.make_spec("motion_blur", 2)
    with pytest.raises(ValueError):
        degrade.make_spec("jpeg", 3.5)
    assert degrade.make_spec("gaussian_blur", 5.0) == degrade.GaussianBlur(5)


def test_stochastic_specs_need_rng():
    with pytest.raises(ValueError):
        degrade.apply(degrade.AwgnShared(0.1), np.zeros((4, 4, 3)))
