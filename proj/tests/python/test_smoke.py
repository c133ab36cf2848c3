import numpy as np
import pytest

import cslnet


def test_version():
    assert cslnet.__version__.count(".") == 2


def test_rng_reference_vector():
    rng = cslnet.Xoshiro256ss(0)
    assert [rng.next() for _ in range(2)] == [0x99EC5F36CB75F2B4, 0xBF6E1F784956452A]
    assert cslnet.Xoshiro256ss(7).uniform() == 0.7005764821796896


@pytest.mark.parametrize("kind", [cslnet.Kind.Circulant, cslnet.Kind.Toeplitz])
def test_structured_matches_dense(kind):
    phi = cslnet.SensingMatrix.build(kind, 32, 64, seed=7)
    x = np.random.default_rng(1).normal(size=64)
    dense = phi.dense() @ x
    assert np.max(np.abs(cslnet.apply_structured(phi, x) - dense)) < 1e-10
    assert np.max(np.abs(cslnet.apply(phi, x) - dense)) < 1e-10


def test_gaussian_entry_scale():
    phi = cslnet.SensingMatrix.build(cslnet.Kind.Gaussian, 400, 400, seed=3)
    assert abs(phi.dense().var() * 400 - 1) < 0.05


def test_compress_image_is_separable():
    rows = cslnet.SensingMatrix.build(cslnet.Kind.Toeplitz, 8, 12, seed=1)
    cols = cslnet.SensingMatrix.build(cslnet.Kind.Circulant, 8, 12, seed=2)
    image = np.random.default_rng(2).uniform(size=(12, 12))
    y = cslnet.compress_image(rows, cols, image)
    assert np.allclose(y, rows.dense() @ image @ cols.dense().T, atol=1e-12)


def test_omp_recovers_sparse_signal():
    phi = cslnet.SensingMatrix.build(cslnet.Kind.Gaussian, 32, 64, seed=3)
    x = np.zeros(64)
    x[[3, 17, 40]] = [1.5, -0.8, 2.0]
    result = cslnet.omp(cslnet.apply(phi, x), phi, 3)
    assert sorted(result.support) == [3, 17, 40]
    assert np.allclose(result.estimate, x, atol=1e-9)


def test_ista_objective_decreases():
    phi = cslnet.SensingMatrix.build(cslnet.Kind.Gaussian, 32, 64, seed=4)
    x = np.zeros(64)
    x[5] = 1.0
    obj = np.array(cslnet.ista_l1(cslnet.apply(phi, x), phi).objective)
    assert np.all(np.diff(obj) <= 1e-12 * obj[:-1] + 1e-15)


def test_features_and_synthetic_data():
    images, labels = cslnet.synthesize_dataset(3, seed=5, difficulty="easy")
    assert len(images) == 6 and labels == [0, 1] * 3
    assert images[0].shape == (120, 120)
    channels = cslnet.extract_channels(images[0], "GCT", 64, 1)
    assert [c.shape for c in channels] == [(64, 64)] * 3
    assert len(cslnet.enumerate_combos()) == 10
    assert len(cslnet.enumerate_combos(False)) == 27


def test_fold_plan():
    labels = [0] * 397 + [1] * 349
    folds, pool = cslnet.stratified_kfold(labels, 5, 0)
    assert [len(f) for f in folds] == [138] * 5
    assert len(pool) == 56


def test_errors_are_typed():
    with pytest.raises(cslnet.ConfigError):
        cslnet.SensingMatrix.build(cslnet.Kind.Gaussian, 0, 4)
    with pytest.raises(cslnet.Error):
        cslnet.extract_channels(np.zeros((8, 8)), "GXT", 4, 0)
