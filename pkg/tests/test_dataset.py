import gzip
import struct

import numpy as np
import pytest

from sparsenet import dataset as ds
from sparsenet.dataset import Dataset, DatasetError


def perceptron_separates(x, y, epochs=1000):
    """Rosenblatt perceptron; returns True once an epoch makes no mistakes."""
    xb = np.hstack([x, np.ones((len(x), 1))])
    s = np.where(y == 1, 1.0, -1.0)
    w = np.zeros(xb.shape[1])
    for _ in range(epochs):
        mistakes = 0
        for xi, si in zip(xb, s):
            if si * (xi @ w) <= 0:
                w += si * xi
                mistakes += 1
        if mistakes == 0:
            return True
    return False


def grid_dataset(n, dim, classes, seed):
    rng = np.random.default_rng(seed)
    return Dataset(rng.integers(0, 256, (n, dim)) / 255.0, rng.integers(0, classes, n), classes)


class TestIdx:
    def test_magic_numbers(self):
        assert (ds.IMAGE_MAGIC, ds.LABEL_MAGIC) == (2051, 2049)

    def test_round_trip_1000(self, tmp_path):
        d = grid_dataset(1000, 784, 10, 0)
        ds.to_idx(d, tmp_path / "img", tmp_path / "lab")
        assert ds.from_idx(tmp_path / "img", tmp_path / "lab") == d

    def test_round_trip_non_square(self, tmp_path):
        d = grid_dataset(30, 7, 3, 1)
        ds.to_idx(d, tmp_path / "img", tmp_path / "lab")
        back = ds.from_idx(tmp_path / "img", tmp_path / "lab", class_count=3)
        assert back == d

    def test_file_layout(self, tmp_path):
        ds.write_idx_images(tmp_path / "i", np.arange(8, dtype=np.uint8).reshape(2, 2, 2))
        raw = (tmp_path / "i").read_bytes()
        assert raw[:16] == struct.pack(">iiii", 2051, 2, 2, 2)
        assert list(raw[16:]) == list(range(8))

    def test_scaling_and_zero_row(self, tmp_path):
        imgs = np.zeros((2, 28, 28), dtype=np.uint8)
        imgs[1, 0, :3] = [255, 51, 1]
        ds.write_idx_images(tmp_path / "i", imgs)
        ds.write_idx_labels(tmp_path / "l", [3, 4])
        d = ds.from_idx(tmp_path / "i", tmp_path / "l")
        assert d.input_dim == 784
        assert not d.features[0].any()
        assert d.features[1, :3].tolist() == [1.0, 0.2, 1 / 255]

    def test_gzip(self, tmp_path):
        d = grid_dataset(5, 4, 2, 2)
        ds.to_idx(d, tmp_path / "i", tmp_path / "l")
        for name in ("i", "l"):
            (tmp_path / f"{name}.gz").write_bytes(gzip.compress((tmp_path / name).read_bytes()))
            (tmp_path / name).unlink()
        assert ds.from_idx(tmp_path / "i", tmp_path / "l", 2) == d

    def test_bad_magic(self, tmp_path):
        ds.write_idx_labels(tmp_path / "l", [1])
        with pytest.raises(DatasetError, match="magic"):
            ds.load_idx_images(tmp_path / "l")

    def test_truncated(self, tmp_path):
        ds.write_idx_images(tmp_path / "i", np.zeros((3, 2, 2), dtype=np.uint8))
        raw = (tmp_path / "i").read_bytes()
        (tmp_path / "i").write_bytes(raw[:-1])
        with pytest.raises(DatasetError, match="truncated"):
            ds.load_idx_images(tmp_path / "i")
        (tmp_path / "i").write_bytes(raw[:10])
        with pytest.raises(DatasetError, match="truncated"):
            ds.load_idx_images(tmp_path / "i")

    def test_count_mismatch(self, tmp_path):
        ds.write_idx_images(tmp_path / "i", np.zeros((3, 2, 2), dtype=np.uint8))
        ds.write_idx_labels(tmp_path / "l", [0, 1])
        with pytest.raises(DatasetError, match="labels"):
            ds.from_idx(tmp_path / "i", tmp_path / "l")

    def test_off_grid_features_refused(self, tmp_path):
        d = Dataset(np.array([[0.5]]), np.array([0]), 1)
        with pytest.raises(DatasetError):
            ds.to_idx(d, tmp_path / "i", tmp_path / "l")

    def test_csv_export(self, tmp_path):
        d = Dataset(np.array([[0.0, 1.0], [0.5, 0.25]]), np.array([1, 0]), 2)
        ds.to_csv(d, tmp_path / "d.csv")
        assert (tmp_path / "d.csv").read_text().splitlines() == ["label,x0,x1", "1,0.0,1.0", "0,0.5,0.25"]


class TestDataset:
    @pytest.mark.parametrize(
        "features,labels,classes",
        [
            (np.zeros((2, 3)), np.array([0, 2]), 2),
            (np.zeros((2, 3)), np.array([0]), 2),
            (np.full((1, 3), 1.5), np.array([0]), 2),
            (np.full((1, 3), -0.1), np.array([0]), 2),
        ],
    )
    def test_invalid(self, features, labels, classes):
        with pytest.raises(DatasetError):
            Dataset(features, labels, classes)

    def test_immutable(self):
        d = grid_dataset(3, 2, 2, 0)
        with pytest.raises(ValueError):
            d.features[0, 0] = 0.5


class TestOneHot:
    def test_vectors(self):
        assert ds.one_hot(0, 3).tolist() == [1, 0, 0]
        assert ds.one_hot(2, 3).tolist() == [0, 0, 1]
        with pytest.raises(DatasetError):
            ds.one_hot(3, 3)

    def test_matrix(self):
        assert ds.one_hot_matrix([2, 0], 3).tolist() == [[0, 1], [0, 0], [1, 0]]


class TestSubsample:
    def test_balanced(self):
        d = grid_dataset(2000, 3, 10, 4)
        s = ds.subsample(d, 100, 7)
        assert len(s) == 1000 and s.class_counts().tolist() == [100] * 10

    def test_deterministic(self):
        d = grid_dataset(500, 3, 4, 5)
        assert ds.subsample(d, 20, 1) == ds.subsample(d, 20, 1)
        assert ds.subsample(d, 20, 1) != ds.subsample(d, 20, 2)

    def test_full_class_is_permutation(self):
        d = grid_dataset(300, 3, 3, 6)
        per = int(d.class_counts().min())
        d = d.take(np.concatenate([np.flatnonzero(d.labels == c)[:per] for c in range(3)]))
        s = ds.subsample(d, per, 9)
        key = lambda dd: sorted(map(tuple, np.column_stack([dd.features, dd.labels]).tolist()))
        assert key(s) == key(d)

    def test_too_few(self):
        d = grid_dataset(20, 2, 2, 0)
        with pytest.raises(DatasetError):
            ds.subsample(d, 50, 0)
        with pytest.raises(DatasetError):
            ds.subsample(d, 0, 0)


class TestBlobs:
    def test_sizes(self):
        d = ds.synthetic_blobs(3, 5, 50, 0.3, 1)
        assert len(d) == 150 and d.class_counts().tolist() == [50] * 3 and d.input_dim == 5

    def test_deterministic(self):
        assert ds.synthetic_blobs(3, 4, 20, 0.3, 8) == ds.synthetic_blobs(3, 4, 20, 0.3, 8)

    def test_in_unit_box_on_pixel_grid(self):
        f = ds.synthetic_blobs(4, 6, 100, 0.5, 3).features
        assert f.min() >= 0 and f.max() <= 1
        assert np.array_equal(np.rint(f * 255) / 255, f)

    @pytest.mark.parametrize("seed", range(5))
    def test_large_separation_is_linearly_separable(self, seed):
        d = ds.synthetic_blobs(2, 2, 100, 1.0, seed)
        assert perceptron_separates(d.features, d.labels)

    def test_bad_separation(self):
        with pytest.raises(DatasetError):
            ds.synthetic_blobs(2, 2, 10, 0.0, 0)
        with pytest.raises(DatasetError):
            ds.synthetic_blobs(5, 1, 10, 0.9, 0)


def test_mnist_loader(mnist_dir):
    train = ds.load_mnist(mnist_dir, "train")
    test = ds.load_mnist(mnist_dir, "test")
    assert (len(train), len(test)) == (60000, 10000)
    assert train.input_dim == 784
    assert train.features.min() == 0.0 and train.features.max() == 1.0
    assert sorted(set(train.labels.tolist())) == list(range(10))
