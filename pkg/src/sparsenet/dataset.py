"""MNIST IDX ingestion and seeded synthetic datasets."""

from __future__ import annotations

import csv
import gzip
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

IMAGE_MAGIC = 2051
LABEL_MAGIC = 2049

MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


class DatasetError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature rows in [0, 1] with integer class labels."""

    features: np.ndarray
    labels: np.ndarray
    class_count: int

    def __post_init__(self):
        f = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        if f.ndim != 2 or y.shape != (f.shape[0],):
            raise DatasetError(f"features {f.shape} and labels {y.shape} disagree")
        if y.size and (y.min() < 0 or y.max() >= self.class_count):
            raise DatasetError("label outside [0, class_count)")
        if f.size and (f.min() < 0.0 or f.max() > 1.0):
            raise DatasetError("features must lie in [0, 1]")
        f.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "labels", y)

    @property
    def input_dim(self) -> int:
        return self.features.shape[1]

    def __len__(self):
        return self.features.shape[0]

    def __iter__(self):
        return iter(zip(self.features, self.labels))

    def take(self, index) -> "Dataset":
        return Dataset(self.features[index], self.labels[index], self.class_count)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.class_count)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.class_count == other.class_count
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
        )


def _open(path: Union[str, Path]):
    path = Path(path)
    if not path.exists() and path.with_suffix(path.suffix + ".gz").exists():
        path = path.with_suffix(path.suffix + ".gz")
    if path.suffix == ".gz":
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_idx(path, magic: int, ndim: int) -> np.ndarray:
    with _open(path) as fh:
        raw = fh.read()
    if len(raw) < 4 + 4 * ndim:
        raise DatasetError(f"{path}: truncated IDX header")
    (found,) = struct.unpack(">i", raw[:4])
    if found != magic:
        raise DatasetError(f"{path}: bad magic number {found}, expected {magic}")
    dims = struct.unpack(">" + "i" * ndim, raw[4 : 4 + 4 * ndim])
    body = raw[4 + 4 * ndim :]
    expected = int(np.prod(dims))
    if len(body) < expected:
        raise DatasetError(f"{path}: truncated, expected {expected} data bytes, found {len(body)}")
    return np.frombuffer(body, dtype=np.uint8, count=expected).reshape(dims)


def load_idx_images(path) -> np.ndarray:
    """Raw uint8 tensor of shape (count, rows, cols)."""
    return _read_idx(path, IMAGE_MAGIC, 3)


def load_idx_labels(path) -> np.ndarray:
    return _read_idx(path, LABEL_MAGIC, 1)


def from_idx(images_path, labels_path, class_count: int = 10) -> Dataset:
    images = load_idx_images(images_path)
    labels = load_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise DatasetError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    features = images.reshape(images.shape[0], -1) / 255.0
    return Dataset(features, labels.astype(np.int64), class_count)


def load_mnist(directory, split: str = "train") -> Dataset:
    images, labels = MNIST_FILES[split]
    directory = Path(directory)
    return from_idx(directory / images, directory / labels)


def write_idx_images(path, images: np.ndarray) -> None:
    images = np.asarray(images, dtype=np.uint8)
    if images.ndim != 3:
        raise DatasetError("image tensor must be 3-D (count, rows, cols)")
    with open(path, "wb") as fh:
        fh.write(struct.pack(">iiii", IMAGE_MAGIC, *images.shape))
        fh.write(images.tobytes())


def write_idx_labels(path, labels: np.ndarray) -> None:
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() > 255):
        raise DatasetError("IDX labels are single bytes")
    with open(path, "wb") as fh:
        fh.write(struct.pack(">ii", LABEL_MAGIC, labels.shape[0]))
        fh.write(labels.astype(np.uint8).tobytes())


def to_idx(d: Dataset, images_path, labels_path) -> None:
    """Write features as bytes (x * 255); exact for features on the 1/255 grid."""
    pixels = np.rint(d.features * 255.0)
    if not np.allclose(pixels / 255.0, d.features, rtol=0, atol=1e-12):
        raise DatasetError("features are not multiples of 1/255 and would not round-trip")
    side = int(round(np.sqrt(d.input_dim)))
    shape = (side, side) if side * side == d.input_dim else (1, d.input_dim)
    write_idx_images(images_path, pixels.astype(np.uint8).reshape((len(d),) + shape))
    write_idx_labels(labels_path, d.labels)


def to_csv(d: Dataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["label"] + [f"x{i}" for i in range(d.input_dim)])
        for x, y in d:
            w.writerow([int(y)] + [repr(float(v)) for v in x])


def one_hot(label: int, class_count: int) -> np.ndarray:
    if not (0 <= label < class_count):
        raise DatasetError(f"label {label} outside [0, {class_count})")
    out = np.zeros(class_count)
    out[label] = 1.0
    return out


def one_hot_matrix(labels, class_count: int) -> np.ndarray:
    """Targets as columns: shape (class_count, len(labels))."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= class_count):
        raise DatasetError("label out of range")
    out = np.zeros((class_count, labels.size))
    out[labels, np.arange(labels.size)] = 1.0
    return out


def subsample(d: Dataset, per_class: int, seed: int) -> Dataset:
    """Class-balanced random subset, classes interleaved in a seeded order."""
    if per_class < 1:
        raise DatasetError("per_class must be at least 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    picked = []
    for c in range(d.class_count):
        idx = np.flatnonzero(d.labels == c)
        if idx.size < per_class:
            raise DatasetError(f"class {c} has {idx.size} samples, fewer than {per_class}")
        picked.append(rng.permutation(idx)[:per_class])
    order = rng.permutation(np.concatenate(picked))
    return d.take(order)


def _place_centres(rng, classes: int, dim: int, separation: float, attempts: int = 200) -> list:
    # a badly placed early centre can leave no room for the rest, so restart
    for _ in range(attempts):
        centres = []
        for _ in range(200):
            c = rng.uniform(0.0, 1.0, size=dim)
            if all(np.linalg.norm(c - o) >= separation for o in centres):
                centres.append(c)
                if len(centres) == classes:
                    return centres
    raise DatasetError("could not place cluster centres at the requested separation")


def synthetic_blobs(
    classes: int, dim: int, per_class: int, separation: float, seed: int, spread: Optional[float] = None
) -> Dataset:
    """Gaussian clusters in [0, 1]^dim, quantised to the 1/255 pixel grid.

    Centres are drawn by rejection (restarting from scratch when stuck) until
    every pair is at least ``separation`` apart; the cluster spread defaults
    to separation / 8.
    """
    if separation <= 0:
        raise DatasetError("separation must be positive")
    rng = np.random.Generator(np.random.PCG64(seed))
    spread = separation / 8.0 if spread is None else spread
    centres = _place_centres(rng, classes, dim, separation)
    centres = np.array(centres)
    labels = np.repeat(np.arange(classes), per_class)
    x = centres[labels] + spread * rng.standard_normal((labels.size, dim))
    x = np.clip(np.rint(x * 255.0), 0, 255) / 255.0
    order = rng.permutation(labels.size)
    return Dataset(x[order], labels[order], classes)
