import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from degbench.metrics import (
    EvalRecord, SsimParams, feature_ssim, mean_ssim, normalize_map, psnr, rank_classes, ssim_map,
    top_k_accuracy, top_k_from_scores,
)
from oracles import ssim_loops

maps = hnp.arrays(np.float64, st.tuples(st.integers(11, 18), st.integers(11, 18)), elements=st.floats(0, 1))


def test_ssim_self_similarity():
    x = np.random.default_rng(0).uniform(size=(32, 32, 3))
    assert abs(mean_ssim(x, x) - 1.0) < 1e-9


@given(maps, st.integers(0, 1000))
def test_ssim_symmetry(a, seed):
    b = np.clip(a + np.random.default_rng(seed).normal(0, 0.1, a.shape), 0, 1)
    assert abs(mean_ssim(a, b) - mean_ssim(b, a)) < 1e-12
    assert mean_ssim(a, b) <= 1 + 1e-12


@pytest.mark.parametrize("c", [0.2, 0.5, 0.8])
def test_ssim_constant_offset_closed_form(c):
    d = 0.1
    p = SsimParams()
    c1 = (p.k1 * p.data_range) ** 2
    expected = (2 * c * (c + d) + c1) / (c * c + (c + d) ** 2 + c1)
    a = np.full((20, 20), c)
    assert abs(mean_ssim(a, a + d) - expected) < 1e-9


def test_ssim_matches_loop_reference():
    rng = np.random.default_rng(1)
    a = rng.uniform(size=(16, 17))
    b = np.clip(a + rng.normal(0, 0.2, a.shape), 0, 1)
    g = SsimParams().kernel_1d()
    assert abs(mean_ssim(a, b) - ssim_loops(a, b, np.outer(g, g))) < 1e-10
    uni = SsimParams(gaussian=False)
    assert abs(mean_ssim(a, b, uni) - ssim_loops(a, b, np.full((11, 11), 1 / 121))) < 1e-10


def test_ssim_window_normalized():
    assert abs(SsimParams().kernel_1d().sum() - 1) < 1e-12


def test_ssim_inverse_binary_is_strongly_negative():
    x = (np.random.default_rng(2).uniform(size=(24, 24)) > 0.5).astype(float)
    assert mean_ssim(x, 1 - x) < -0.8


def test_ssim_errors():
    with pytest.raises(ValueError):
        mean_ssim(np.zeros((12, 12)), np.zeros((12, 13)))
    with pytest.raises(ValueError):
        mean_ssim(np.zeros((10, 12)), np.zeros((10, 12)))


def test_ssim_map_shape_is_valid_region():
    assert ssim_map(np.zeros((20, 15)), np.zeros((20, 15))).shape == (10, 5)


def test_psnr_cases():
    a = np.full((8, 8, 3), 0.4)
    assert psnr(a, a) == math.inf
    assert abs(psnr(a, a + 0.1) - 20.0) < 1e-9
    b = np.random.default_rng(0).uniform(size=a.shape)
    assert psnr(a, b) == psnr(b, a)
    with pytest.raises(ValueError):
        psnr(a, a[:4])


def test_psnr_decreases_with_mse():
    a = np.zeros((8, 8))
    vals = [psnr(a, a + e) for e in (0.01, 0.02, 0.05, 0.1, 0.3)]
    assert all(x > y for x, y in zip(vals, vals[1:]))


def test_normalize_map_examples():
    m = np.array([[0.0, 0.3], [1.0, 0.5]])
    np.testing.assert_array_equal(normalize_map(m), m)
    np.testing.assert_array_equal(normalize_map(np.full((3, 3), 7.0)), np.full((3, 3), 0.5))
    np.testing.assert_allclose(normalize_map(np.array([-1.0, 0.0, 3.0])), [0, 0.25, 1])


def test_rank_ties_break_to_lower_index():
    np.testing.assert_array_equal(rank_classes(np.array([0.2, 0.5, 0.5, 0.1])), [1, 2, 0, 3])


def test_top_k_single_record():
    rec = EvalRecord(0, 2, np.array([0.1, 0.2, 0.9, 0.3][::-1]))  # class 2 ranked second
    assert top_k_accuracy([rec], 1) == 0.0
    assert top_k_accuracy([rec], 3) == 1.0
    assert top_k_accuracy([rec], 4) == 1.0


def test_top_k_errors():
    with pytest.raises(ValueError):
        top_k_accuracy([], 1)
    with pytest.raises(ValueError):
        top_k_accuracy([EvalRecord(0, 0, np.ones(3))], 4)


def test_planted_rank_accuracy():
    rng = np.random.default_rng(5)
    n, classes = 100, 8
    planted = rng.integers(0, classes, n)  # rank position of the true class
    records = []
    for i, r in enumerate(planted):
        order = rng.permutation(classes)
        scores = np.empty(classes)
        scores[order] = np.arange(classes, 0, -1)  # order[0] gets the top score
        records.append(EvalRecord(i, int(order[r]), scores))
    for k in range(1, classes + 1):
        assert top_k_accuracy(records, k) == np.mean(planted < k)


@given(hnp.arrays(np.float64, st.tuples(st.integers(1, 20), st.just(6)), elements=st.floats(-5, 5)),
       st.data())
def test_top_k_monotone_in_k(scores, data):
    labels = data.draw(hnp.arrays(np.int64, scores.shape[0], elements=st.integers(0, 5)))
    accs = [top_k_from_scores(scores, labels, k) for k in range(1, 7)]
    assert all(a <= b for a, b in zip(accs, accs[1:]))
    assert accs[-1] == 1.0


def test_feature_ssim_identity_and_constant_maps():
    rng = np.random.default_rng(0)
    f = rng.uniform(size=(4, 12, 12))
    f[1] = 0.0  # dead filter
    assert abs(feature_ssim(f, f) - 1.0) < 1e-12
    g = f + rng.normal(0, 0.3, f.shape)
    assert feature_ssim(f, g) < 1.0
