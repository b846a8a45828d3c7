"""Dataset acquisition: IDX-format parsing for MNIST files and a seeded
Gaussian-blob generator for fast synthetic experiments."""

from __future__ import annotations

import gzip
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import IdxFormatError
from .numerics import RngStream

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801
_GZIP_MAGIC = b"\x1f\x8b"

MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


@dataclass(frozen=True)
class Dataset:
    """An in-memory split: features (n, d) in [0, 1] plus integer labels."""

    features: np.ndarray = field(repr=False)
    labels: np.ndarray = field(repr=False)
    num_classes: int
    split: str

    def __post_init__(self):
        if len(self.features) != len(self.labels):
            raise ValueError("feature rows must match label count")
        if len(self.labels) and self.labels.max() >= self.num_classes:
            raise ValueError("label out of range")

    def __len__(self) -> int:
        return len(self.labels)


def _maybe_decompress(data: bytes) -> bytes:
    if data[:2] == _GZIP_MAGIC:
        return gzip.decompress(data)
    return data


def parse_idx_images(data: bytes) -> np.ndarray:
    """Parse an IDX image byte stream into an (n, rows*cols) float64 matrix
    scaled to [0, 1]. Accepts gzip-compressed input transparently."""
    data = _maybe_decompress(data)
    if len(data) < 16:
        raise IdxFormatError("image stream shorter than its header")
    magic, count, rows, cols = struct.unpack(">IIII", data[:16])
    if magic != IDX_IMAGE_MAGIC:
        raise IdxFormatError(f"bad image magic 0x{magic:08x}")
    expected = 16 + count * rows * cols
    if len(data) != expected:
        raise IdxFormatError(
            f"image payload is {len(data) - 16} bytes, header promises {expected - 16}"
        )
    pixels = np.frombuffer(data, dtype=np.uint8, offset=16)
    return pixels.reshape(count, rows * cols).astype(np.float64) / 255.0


def parse_idx_labels(data: bytes) -> np.ndarray:
    """Parse an IDX label byte stream; labels must be digits 0-9."""
    data = _maybe_decompress(data)
    if len(data) < 8:
        raise IdxFormatError("label stream shorter than its header")
    magic, count = struct.unpack(">II", data[:8])
    if magic != IDX_LABEL_MAGIC:
        raise IdxFormatError(f"bad label magic 0x{magic:08x}")
    if len(data) != 8 + count:
        raise IdxFormatError(
            f"label payload is {len(data) - 8} bytes, header promises {count}"
        )
    labels = np.frombuffer(data, dtype=np.uint8, offset=8).astype(np.int64)
    if labels.size and labels.max() > 9:
        raise IdxFormatError("label outside the digit range 0-9")
    return labels


def _read_idx_file(path: str) -> bytes:
    with open(path, "rb") as fh:
        return fh.read()


def find_mnist(data_dir: str) -> dict[str, str] | None:
    """Locate the four standard MNIST files (plain or .gz) under a
    directory; returns None unless all four are present."""
    found = {}
    for key, name in MNIST_FILES.items():
        for candidate in (name, name + ".gz"):
            path = os.path.join(data_dir, candidate)
            if os.path.exists(path):
                found[key] = path
                break
        else:
            return None
    return found


def stratified_head(labels: np.ndarray, total: int, num_classes: int) -> np.ndarray:
    """Indices of a class-balanced prefix: the first total/K occurrences of
    each class in file order. Deterministic, no randomness involved."""
    quota = total // num_classes
    extra = total % num_classes
    take = []
    for c in range(num_classes):
        want = quota + (1 if c < extra else 0)
        idx = np.flatnonzero(labels == c)[:want]
        if len(idx) < want:
            raise ValueError(f"class {c} has only {len(idx)} samples, need {want}")
        take.append(idx)
    return np.sort(np.concatenate(take))


def load_mnist(
    data_dir: str,
    subsample: int | None = None,
    test_subsample: int | None = None,
) -> tuple[Dataset, Dataset]:
    """Load the MNIST train/test splits from a directory of IDX files.

    Optional subsampling keeps a class-stratified prefix of each split so
    desk-scale experiments finish quickly.
    """
    paths = find_mnist(data_dir)
    if paths is None:
        raise FileNotFoundError(f"MNIST IDX files not found under {data_dir!r}")
    out = []
    for split, img_key, lab_key, limit in (
        ("train", "train_images", "train_labels", subsample),
        ("test", "test_images", "test_labels", test_subsample),
    ):
        images = parse_idx_images(_read_idx_file(paths[img_key]))
        labels = parse_idx_labels(_read_idx_file(paths[lab_key]))
        if len(images) != len(labels):
            raise IdxFormatError("image and label counts disagree")
        if limit is not None and limit < len(labels):
            keep = stratified_head(labels, limit, 10)
            images, labels = images[keep], labels[keep]
        out.append(Dataset(images, labels, num_classes=10, split=split))
    return out[0], out[1]


def _class_directions(num_classes: int, dim: int) -> np.ndarray:
    if dim >= num_classes:
        dirs = np.zeros((num_classes, dim))
        dirs[np.arange(num_classes), np.arange(num_classes)] = 1.0
        return dirs
    if dim >= 2:
        angles = 2.0 * np.pi * np.arange(num_classes) / num_classes
        dirs = np.zeros((num_classes, dim))
        dirs[:, 0] = np.cos(angles)
        dirs[:, 1] = np.sin(angles)
        return dirs
    # 1-D fallback: evenly spaced points on the line
    return np.linspace(-1.0, 1.0, num_classes)[:, None]


def synthetic_blobs(
    num_classes: int,
    dim: int,
    n_per_class: int,
    separation: float,
    rng: RngStream,
) -> tuple[Dataset, Dataset]:
    """Isotropic Gaussian blobs, one per class, split 80/20 train/test.

    Class c is centered at separation times a unit direction (axis vectors
    when dim >= K, else evenly spaced directions) with unit noise. Classes
    are exactly balanced before splitting; the per-class test share is
    floor(n_per_class / 5), the remainder goes to train.
    """
    if num_classes < 2:
        raise ValueError("need at least two classes")
    if separation <= 0:
        raise ValueError("separation must be positive")
    if n_per_class < 1:
        raise ValueError("n_per_class must be at least 1")
    gen = rng.generator()
    centers = separation * _class_directions(num_classes, dim)
    n_test = n_per_class // 5
    n_train = n_per_class - n_test
    train_x, train_y, test_x, test_y = [], [], [], []
    for c in range(num_classes):
        points = centers[c] + gen.standard_normal((n_per_class, dim))
        train_x.append(points[:n_train])
        train_y.append(np.full(n_train, c, dtype=np.int64))
        test_x.append(points[n_train:])
        test_y.append(np.full(n_test, c, dtype=np.int64))
    train = Dataset(
        np.concatenate(train_x), np.concatenate(train_y), num_classes, "train"
    )
    test = Dataset(
        np.concatenate(test_x), np.concatenate(test_y), num_classes, "test"
    )
    return train, test
