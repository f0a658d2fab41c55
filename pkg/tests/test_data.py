"""Synthetic corpus: faces, morphs, preprocessing, splits, disk round-trips."""

import numpy as np
import pytest

from morphlens.data import (
    LAMBDA_MAX,
    LAMBDA_MIN,
    DatasetSplit,
    LabeledImage,
    Provenance,
    build_corpus,
    generate_face,
    load_corpus,
    morph,
    preprocess,
    save_corpus,
    split,
)
from morphlens.errors import DataError
from morphlens.viz import RgbImage


def flat_face(value, uid="bf-x", size=8):
    pixels = np.full((size, size, 3), value, dtype=np.uint8)
    return LabeledImage(uid, RgbImage(pixels), 0, Provenance("generated"))


# generate_face


def test_generate_face_deterministic():
    a = generate_face(7, 3, 64)
    b = generate_face(7, 3, 64)
    assert np.array_equal(a.image.pixels, b.image.pixels)
    assert a.uid == b.uid == "bf-0003"


def test_generate_face_seeds_differ():
    for base in range(20):
        a = generate_face(base, 0, 32).image.pixels
        b = generate_face(base + 1000, 0, 32).image.pixels
        changed = (a != b).any(axis=2).mean()
        assert changed >= 0.01


def test_generate_face_contract():
    face = generate_face(1, 0, 16)
    assert face.label == 0
    assert face.provenance.kind == "generated"
    assert face.image.pixels.shape == (16, 16, 3)
    assert face.image.pixels.dtype == np.uint8
    with pytest.raises(DataError):
        generate_face(1, 0, 7)


def test_generate_face_has_structure():
    # face oval must change tone against the background, even under noise
    face = generate_face(5, 2, 64).image.pixels.astype(np.float64)
    center = face[24:40, 24:40].mean()
    corner = face[:8, :8].mean()
    assert center - corner > 20.0


# morph


def test_morph_midpoint_arithmetic():
    out = morph(flat_face(100, "a"), flat_face(200, "b"), 0.5)
    assert (out.image.pixels == 150).all()
    assert out.label == 1
    assert out.provenance == Provenance("blend", "a", "b", 0.5)


def test_morph_rejects_out_of_range_lambda():
    a, b = flat_face(10, "a"), flat_face(20, "b")
    with pytest.raises(DataError):
        morph(a, b, 0.1)
    with pytest.raises(DataError):
        morph(a, b, 0.76)


def test_morph_symmetry_dyadic():
    # exact only when 1 - (1 - lam) == lam, true for dyadic weights
    a = generate_face(3, 0, 32)
    b = generate_face(3, 1, 32)
    for lam in (0.25, 0.375, 0.5, 0.625, 0.75):
        left = morph(a, b, lam).image.pixels
        right = morph(b, a, 1.0 - lam).image.pixels
        assert np.array_equal(left, right)


def test_morph_pixels_between_parents():
    a = generate_face(9, 0, 32)
    b = generate_face(9, 1, 32)
    out = morph(a, b, 0.3).image.pixels.astype(np.int64)
    low = np.minimum(a.image.pixels, b.image.pixels).astype(np.int64) - 1
    high = np.maximum(a.image.pixels, b.image.pixels).astype(np.int64) + 1
    assert (out >= low).all() and (out <= high).all()


def test_morph_preconditions():
    a = flat_face(10, "a")
    with pytest.raises(DataError):
        morph(a, flat_face(20, "b", size=9), 0.5)
    morphed = morph(a, flat_face(20, "b"), 0.5)
    with pytest.raises(DataError):
        morph(morphed, a, 0.5)


def test_labeled_image_validation():
    pixels = RgbImage(np.zeros((8, 8, 3), dtype=np.uint8))
    with pytest.raises(DataError):
        LabeledImage("x", pixels, 2, Provenance("generated"))
    with pytest.raises(DataError):
        LabeledImage("x", pixels, 1, Provenance("generated"))
    with pytest.raises(DataError):
        LabeledImage("x", pixels, 1, Provenance("blend", "a", "b", 0.9))
    with pytest.raises(DataError):
        LabeledImage("x", pixels, 0, Provenance("blend", "a", "b", 0.5))


# build_corpus


def test_build_corpus_counts():
    corpus = build_corpus(2, 1, seed=3, resolution=16)
    assert len(corpus) == 3
    assert [s.label for s in corpus] == [0, 0, 1]


def test_build_corpus_deterministic():
    a = build_corpus(6, 4, seed=11, resolution=16)
    b = build_corpus(6, 4, seed=11, resolution=16)
    assert [s.uid for s in a] == [s.uid for s in b]
    for x, y in zip(a, b):
        assert np.array_equal(x.image.pixels, y.image.pixels)


def test_build_corpus_distinct_pairs_and_lambda_range():
    corpus = build_corpus(6, 10, seed=2, resolution=16)
    pairs = set()
    for sample in corpus:
        if sample.label == 1:
            p = sample.provenance
            key = tuple(sorted((p.source_a, p.source_b)))
            assert key not in pairs
            pairs.add(key)
            assert LAMBDA_MIN <= p.lam <= LAMBDA_MAX
    assert len(pairs) == 10


def test_build_corpus_infeasible():
    with pytest.raises(DataError):
        build_corpus(2, 2, seed=1, resolution=16)
    with pytest.raises(DataError):
        build_corpus(-1, 0, seed=1, resolution=16)


# preprocess


def test_preprocess_same_size_is_exact_division():
    face = generate_face(4, 0, 32)
    tensor = preprocess(face.image, 32)
    assert tensor.shape == (3, 32, 32)
    assert np.array_equal(tensor, face.image.pixels.astype(np.float64).transpose(2, 0, 1) / 255.0)


def test_preprocess_constant_image():
    pixels = np.full((10, 10, 3), 51, dtype=np.uint8)
    for r in (8, 16, 33):
        tensor = preprocess(RgbImage(pixels), r)
        assert tensor.shape == (3, r, r)
        assert np.allclose(tensor, 51 / 255.0)


def test_preprocess_checkerboard_midpoint():
    board = np.zeros((2, 2, 3), dtype=np.uint8)
    board[0, 1] = board[1, 0] = 255
    tensor = preprocess(board, 9)
    assert tensor[0, 4, 4] == pytest.approx(0.5, abs=1e-12)


def test_preprocess_grayscale_and_errors():
    gray = np.full((12, 12), 100, dtype=np.uint8)
    tensor = preprocess(gray, 12)
    assert tensor.shape == (3, 12, 12)
    assert np.allclose(tensor, 100 / 255.0)
    with pytest.raises(DataError):
        preprocess(gray, 7)
    with pytest.raises(DataError):
        preprocess(np.zeros((0, 4, 3), dtype=np.uint8), 8)


# split


def test_split_exact_ten_samples():
    corpus = build_corpus(5, 5, seed=8, resolution=16)
    parts = split(corpus, 0.8, seed=1)
    assert isinstance(parts, DatasetSplit)
    assert len(parts.train) == 8 and len(parts.test) == 2
    assert sum(s.label for s in parts.train) == 4
    assert sum(s.label for s in parts.test) == 1


def test_split_deterministic_and_disjoint():
    corpus = build_corpus(8, 6, seed=2, resolution=16)
    a = split(corpus, 0.8, seed=5)
    b = split(corpus, 0.8, seed=5)
    assert [s.uid for s in a.train] == [s.uid for s in b.train]
    assert [s.uid for s in a.test] == [s.uid for s in b.test]
    train_ids = {s.uid for s in a.train}
    test_ids = {s.uid for s in a.test}
    assert not train_ids & test_ids
    assert len(train_ids) + len(test_ids) == len(corpus)


def test_split_ratio_within_one_sample_per_class():
    rng = np.random.default_rng(0)
    for trial in range(8):
        nb = int(rng.integers(3, 12))
        nm = int(rng.integers(1, nb * (nb - 1) // 2 + 1))
        corpus = build_corpus(nb, nm, seed=trial, resolution=16)
        ratio = float(rng.choice([0.5, 0.7, 0.8]))
        parts = split(corpus, ratio, seed=trial)
        for label, total in ((0, nb), (1, nm)):
            got = sum(1 for s in parts.train if s.label == label)
            assert abs(got - ratio * total) <= 0.5 + 1e-9


def test_split_errors():
    with pytest.raises(DataError):
        split([], 0.8, seed=1)
    corpus = build_corpus(3, 1, seed=1, resolution=16)
    with pytest.raises(DataError):
        split(corpus, 1.2, seed=1)


# save / load


def test_corpus_round_trip(tmp_path):
    corpus = build_corpus(4, 3, seed=6, resolution=16)
    save_corpus(tmp_path, corpus)
    manifest = (tmp_path / "manifest.tsv").read_text(encoding="ascii")
    lines = manifest.splitlines()
    assert len(lines) == 7
    assert lines[0].endswith("\t0\t-\t-\t-")
    assert len((tmp_path / "bonafide").glob("*.ppm").__iter__().__next__().read_bytes()) > 0
    loaded = load_corpus(tmp_path)
    assert len(loaded) == 7
    for original, copy in zip(corpus, loaded):
        assert original.uid == copy.uid
        assert original.label == copy.label
        assert np.array_equal(original.image.pixels, copy.image.pixels)
        if original.label == 1:
            assert copy.provenance.source_a == original.provenance.source_a
            assert copy.provenance.lam == pytest.approx(original.provenance.lam, abs=1e-6)


def test_load_corpus_errors(tmp_path):
    with pytest.raises(DataError):
        load_corpus(tmp_path)
    corpus = build_corpus(2, 1, seed=1, resolution=16)
    save_corpus(tmp_path, corpus)
    manifest = tmp_path / "manifest.tsv"
    good = manifest.read_text(encoding="ascii")

    manifest.write_text(good.replace("\t0\t", "\t7\t", 1), encoding="ascii")
    with pytest.raises(DataError):
        load_corpus(tmp_path)

    manifest.write_text("only\tfour\tfields\there\n", encoding="ascii")
    with pytest.raises(DataError):
        load_corpus(tmp_path)

    manifest.write_text(good, encoding="ascii")
    (tmp_path / "morph" / "0000.ppm").unlink()
    with pytest.raises(DataError):
        load_corpus(tmp_path)
