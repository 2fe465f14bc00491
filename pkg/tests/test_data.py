import hashlib
import logging

import numpy as np
import pytest
from PIL import Image

from degbench.data import (
    DataError, DatasetManifest, SynthDigitConfig, discover_fonts, generate_synthetic_digits, kfold_split,
    load_image_folder, render_glyph, render_sample, train_test_for_fold,
)
from oracles import principal_angle

PAPER_NATURAL_COUNTS = {"airplane": 727, "car": 968, "cat": 885, "dog": 702, "flower": 843, "fruit": 1000,
                        "motorbike": 788, "person": 986}


def _digest(root):
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if p.is_file():
            h.update(p.relative_to(root).as_posix().encode())
            h.update(p.read_bytes())
    return h.hexdigest()


def _tiny_png(path, value=0):
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.new("RGB", (1, 1), (value, value, value)).save(path)


# ------------------------------------------------------------ generation

def test_paper_sized_dataset_count(tmp_path):
    cfg = SynthDigitConfig(per_class=1200, canvas=24, seed=0)
    m = generate_synthetic_digits(cfg, tmp_path)
    assert len(m) == 12000
    assert m.counts == [1200] * 10
    assert len(list(tmp_path.rglob("*.png"))) == 12000


def test_regeneration_is_bit_identical(tmp_path):
    cfg = SynthDigitConfig(per_class=5, canvas=48, seed=3)
    generate_synthetic_digits(cfg, tmp_path / "a")
    generate_synthetic_digits(cfg, tmp_path / "b")
    assert _digest(tmp_path / "a") == _digest(tmp_path / "b")
    generate_synthetic_digits(SynthDigitConfig(per_class=5, canvas=48, seed=4), tmp_path / "c")
    assert _digest(tmp_path / "a") != _digest(tmp_path / "c")


def test_rendered_rotation_within_window():
    cfg = SynthDigitConfig(per_class=100, canvas=128, seed=1)
    fonts = discover_fonts()
    checked = 0
    for index in range(1, 1000, 10):  # index % 10 == 1 renders the digit one
        _, label, info = render_sample(cfg, index, fonts)
        assert label == 1
        measured = principal_angle(render_glyph(1, info.font, info.size, info.angle)) - \
            principal_angle(render_glyph(1, info.font, info.size, 0.0))
        assert -31.0 <= measured <= 31.0  # 1 degree of rasterization slack
        assert abs(measured - info.angle) < 3.0  # small glyphs alias by a degree or two
        checked += 1
    assert checked == 100


def test_sample_parameters_follow_config():
    cfg = SynthDigitConfig(per_class=1, canvas=256, seed=2)
    fonts = discover_fonts()
    for i in range(50):
        img, label, info = render_sample(cfg, i, fonts)
        assert img.shape == (256, 256, 3) and img.min() >= 0 and img.max() <= 1
        assert 30 <= info.size <= 240 and -30 <= info.angle <= 30
        assert label == i % 10


def test_font_range_scales_with_small_canvas():
    assert SynthDigitConfig(canvas=128).scaled_font_size() == (15.0, 120.0)
    assert SynthDigitConfig(canvas=512).scaled_font_size() == (30.0, 240.0)


def test_background_pool_crops(tmp_path):
    bg = np.zeros((80, 90, 3), dtype=np.uint8)
    bg[:, :, 2] = 200
    Image.fromarray(bg).save(tmp_path / "bg.png")
    cfg = SynthDigitConfig(per_class=1, canvas=64, backgrounds=(str(tmp_path / "bg.png"),), seed=0)
    m = generate_synthetic_digits(cfg, tmp_path / "ds")
    img = np.asarray(Image.open(m.root / m.paths[0]))
    assert np.median(img[..., 2]) == 200  # the background dominates


def test_unreadable_resources_listed(tmp_path):
    bad = tmp_path / "broken.ttf"
    bad.write_bytes(b"not a font")
    with pytest.raises(DataError, match="broken.ttf"):
        generate_synthetic_digits(SynthDigitConfig(per_class=1, canvas=32, fonts=(str(bad),)), tmp_path / "x")
    badbg = tmp_path / "bg.png"
    badbg.write_bytes(b"garbage")
    with pytest.raises(DataError, match="bg.png"):
        generate_synthetic_digits(SynthDigitConfig(per_class=1, canvas=32, backgrounds=(str(badbg),)),
                                  tmp_path / "y")


def test_config_validation():
    with pytest.raises(DataError):
        SynthDigitConfig(per_class=0)


# --------------------------------------------------------- folder ingest

def test_natural_image_folder_counts(tmp_path):
    for name, n in reversed(list(PAPER_NATURAL_COUNTS.items())):
        for i in range(n):
            _tiny_png(tmp_path / name / f"{i:04d}.png")
    m = load_image_folder(tmp_path)
    assert len(m) == 6899
    assert m.class_names == sorted(PAPER_NATURAL_COUNTS)
    assert m.counts == [PAPER_NATURAL_COUNTS[c] for c in m.class_names]

    m = kfold_split(m, 5, seed=0)
    sizes = sorted(np.bincount(m.folds).tolist())
    # clean stratified 5-fold: every test fold holds 1379 or 1380 images, not 1175
    assert sizes[0] >= 1379 and sizes[-1] <= 1380 and sum(sizes) == 6899
    train, test = train_test_for_fold(m, 0)
    assert len(train) + len(test) == 6899


def test_single_image_folder(tmp_path):
    _tiny_png(tmp_path / "only" / "a.png")
    m = load_image_folder(tmp_path)
    assert len(m) == 1 and m.labels == [0] and m.class_names == ["only"]


def test_duplicate_names_across_classes(tmp_path):
    _tiny_png(tmp_path / "a" / "x.png", 10)
    _tiny_png(tmp_path / "b" / "x.png", 20)
    m = load_image_folder(tmp_path)
    assert m.paths == ["a/x.png", "b/x.png"] and m.labels == [0, 1]


def test_undecodable_files_rejected_with_warning(tmp_path, caplog):
    _tiny_png(tmp_path / "a" / "good.png")
    (tmp_path / "a" / "bad.png").write_bytes(b"nope")
    with caplog.at_level(logging.WARNING):
        m = load_image_folder(tmp_path)
    assert m.paths == ["a/good.png"] and m.rejected == ["a/bad.png"]
    assert "bad.png" in caplog.text


def test_empty_class_directory_is_error(tmp_path):
    _tiny_png(tmp_path / "a" / "good.png")
    (tmp_path / "b").mkdir()
    with pytest.raises(DataError):
        load_image_folder(tmp_path)


# ----------------------------------------------------------------- folds

def _manifest(counts):
    labels = [c for c, n in enumerate(counts) for _ in range(n)]
    paths = [f"{l}/{i}.png" for i, l in enumerate(labels)]
    return DatasetManifest("/nowhere", [str(c) for c in range(len(counts))], paths, labels)


def test_six_fold_paper_split():
    m = kfold_split(_manifest([1200] * 10), 6, seed=0)
    for f in range(6):
        train, test = train_test_for_fold(m, f)
        assert len(test) == 2000 and len(train) == 10000
        assert not set(train.paths) & set(test.paths)


@pytest.mark.parametrize("counts,k", [([7, 9, 13], 3), ([20, 21, 22, 23], 4), ([5, 5], 5), ([101, 57, 33], 6)])
def test_stratification_and_partition(counts, k):
    m = kfold_split(_manifest(counts), k, seed=1)
    folds = np.asarray(m.folds)
    labels = np.asarray(m.labels)
    assert set(folds.tolist()) == set(range(k))
    for c, n in enumerate(counts):
        per = np.bincount(folds[labels == c], minlength=k)
        assert per.max() - per.min() <= 1
        # fold share of class c within one sample of the global proportion
        assert np.all(np.abs(per - n / k) <= 1)
    union = []
    for f in range(k):
        union += train_test_for_fold(m, f)[1].paths
    assert sorted(union) == sorted(m.paths)


def test_kfold_deterministic_and_seeded():
    a = kfold_split(_manifest([30, 30]), 3, seed=7)
    b = kfold_split(_manifest([30, 30]), 3, seed=7)
    c = kfold_split(_manifest([30, 30]), 3, seed=8)
    assert a.folds == b.folds and a.folds != c.folds


def test_kfold_errors():
    with pytest.raises(DataError):
        kfold_split(_manifest([3, 10]), 4)
    with pytest.raises(DataError):
        kfold_split(_manifest([10]), 1)
    with pytest.raises(DataError):
        train_test_for_fold(_manifest([10]), 0)


def test_manifest_round_trip(tmp_path):
    m = kfold_split(_manifest([4, 6]), 2)
    m.root = tmp_path
    path = m.save()
    lines = path.read_text().splitlines()
    assert lines[0] == "#classes\t0\t1"
    assert lines[1].count("\t") == 2
    again = DatasetManifest.load(tmp_path)
    assert (again.paths, again.labels, again.folds, again.class_names) == (m.paths, m.labels, m.folds, m.class_names)


def test_manifest_label_range_checked():
    with pytest.raises(DataError):
        DatasetManifest("/x", ["a"], ["p"], [3])
