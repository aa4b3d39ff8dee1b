"""Dataset ingestion: MNIST IDX files, CIFAR-10/100 binary batches,
seeded batching, and a deterministic synthetic toy set for fast tests.

Pixels are normalized by 1/255 into [0, 1] and nothing else; images are
float32 arrays shaped (n, channels, height, width). Loaders never touch
the network: files come from a user-supplied directory (default taken
from the GRADPATH_DATA_DIR environment variable).
"""

import gzip
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, FormatError, ParameterError

DATA_DIR_ENV = "GRADPATH_DATA_DIR"

# IDX magic numbers (big endian): 0x00000803 = unsigned-byte rank-3 tensor
# (images), 0x00000801 = unsigned-byte rank-1 tensor (labels).
MNIST_IMAGE_MAGIC = 0x00000803
MNIST_LABEL_MAGIC = 0x00000801

CIFAR10_RECORD = 3073   # 1 label byte + 3 * 1024 channel-plane bytes
CIFAR100_RECORD = 3074  # coarse label, fine label, 3072 pixel bytes

FETCH_HINTS = {
    "mnist": ("MNIST IDX files (train-images-idx3-ubyte, train-labels-idx1-ubyte, "
              "t10k-images-idx3-ubyte, t10k-labels-idx1-ubyte), e.g. from "
              "https://ossci-datasets.s3.amazonaws.com/mnist/"),
    "cifar10": ("CIFAR-10 binary version (cifar-10-batches-bin/) from "
                "https://www.cs.toronto.edu/~kriz/cifar-10-binary.tar.gz"),
    "cifar100": ("CIFAR-100 binary version (cifar-100-binary/) from "
                 "https://www.cs.toronto.edu/~kriz/cifar-100-binary.tar.gz"),
}


@dataclass
class Dataset:
    """Immutable labeled image collection."""

    images: np.ndarray   # (n, c, h, w) float32 in [0, 1]
    labels: np.ndarray   # (n,) integer class ids
    kind: str
    class_count: int
    split: str

    @property
    def n(self):
        return self.images.shape[0]


@dataclass
class Batch:
    images: np.ndarray
    labels: np.ndarray


def subset(dataset, k):
    """First-k slice of a dataset (deterministic desk-scale cap)."""
    if k is None or k >= dataset.n:
        return dataset
    if k < 1:
        raise ParameterError(f"subset size must be >= 1, got {k}")
    return Dataset(dataset.images[:k], dataset.labels[:k], dataset.kind,
                   dataset.class_count, dataset.split)


def _read_file(path):
    try:
        raw = Path(path).read_bytes()
    except FileNotFoundError:
        raise DataError(f"dataset file not found: {path}") from None
    if raw[:2] == b"\x1f\x8b":  # transparently accept gzipped files
        raw = gzip.decompress(raw)
    return raw


def load_mnist(image_path, label_path, split="train"):
    """Parse one MNIST IDX image/label file pair.

    Layout (big endian): i32 magic, i32 count, [i32 rows, i32 cols for
    images], then raw unsigned bytes.
    """
    buf = _read_file(image_path)
    if len(buf) < 16:
        raise FormatError(f"{image_path}: truncated IDX image header", offset=len(buf))
    magic, n, h, w = struct.unpack_from(">IIII", buf, 0)
    if magic != MNIST_IMAGE_MAGIC:
        raise FormatError(f"{image_path}: bad IDX image magic 0x{magic:08x}", offset=0)
    expected = 16 + n * h * w
    if len(buf) != expected:
        raise FormatError(
            f"{image_path}: file holds {len(buf)} bytes, header implies {expected}",
            offset=min(len(buf), expected))

    lbuf = _read_file(label_path)
    if len(lbuf) < 8:
        raise FormatError(f"{label_path}: truncated IDX label header", offset=len(lbuf))
    lmagic, ln = struct.unpack_from(">II", lbuf, 0)
    if lmagic != MNIST_LABEL_MAGIC:
        raise FormatError(f"{label_path}: bad IDX label magic 0x{lmagic:08x}", offset=0)
    if len(lbuf) != 8 + ln:
        raise FormatError(
            f"{label_path}: file holds {len(lbuf)} bytes, header implies {8 + ln}",
            offset=min(len(lbuf), 8 + ln))
    if ln != n:
        raise FormatError(
            f"label file holds {ln} labels but image file holds {n} images", offset=4)

    labels = np.frombuffer(lbuf, dtype=np.uint8, offset=8).astype(np.int64)
    if labels.size and labels.max() > 9:
        bad = int(np.argmax(labels > 9))
        raise FormatError(f"{label_path}: label {labels[bad]} out of range 0..9",
                          offset=8 + bad)
    images = np.frombuffer(buf, dtype=np.uint8, offset=16).reshape(n, 1, h, w)
    images = images.astype(np.float32) / 255.0
    return Dataset(images, labels, "mnist", 10, split)


def _parse_cifar(buf, path, record, label_offset, class_count):
    if len(buf) == 0 or len(buf) % record:
        raise FormatError(
            f"{path}: file length {len(buf)} is not a multiple of the "
            f"{record}-byte record size", offset=(len(buf) // record) * record)
    rows = np.frombuffer(buf, dtype=np.uint8).reshape(-1, record)
    labels = rows[:, label_offset].astype(np.int64)
    if labels.max() >= class_count:
        bad = int(np.argmax(labels >= class_count))
        raise FormatError(
            f"{path}: label {labels[bad]} out of range 0..{class_count - 1}",
            offset=bad * record + label_offset)
    pixels = rows[:, record - 3072:].reshape(-1, 3, 32, 32)
    return pixels.astype(np.float32) / 255.0, labels


def load_cifar10(batch_paths, split="train"):
    """Parse CIFAR-10 binary batch files (3073-byte records, R/G/B planes)."""
    if isinstance(batch_paths, (str, Path)):
        batch_paths = [batch_paths]
    parts = [_parse_cifar(_read_file(p), p, CIFAR10_RECORD, 0, 10) for p in batch_paths]
    images = np.concatenate([imgs for imgs, _ in parts], axis=0)
    labels = np.concatenate([lbls for _, lbls in parts], axis=0)
    return Dataset(images, labels, "cifar10", 10, split)


def load_cifar100(path, split="train"):
    """Parse a CIFAR-100 binary file (3074-byte records; fine labels used)."""
    images, labels = _parse_cifar(_read_file(path), path, CIFAR100_RECORD, 1, 100)
    return Dataset(images, labels, "cifar100", 100, split)


def batches(dataset, batch_size, seed=None, shuffle=False):
    """Yield Batch objects covering every sample exactly once.

    With shuffle=True the order is a permutation drawn from a generator
    seeded with ``seed`` (identical across runs). The final batch may be
    smaller than batch_size.
    """
    if batch_size < 1:
        raise ParameterError(f"batch_size must be >= 1, got {batch_size}")
    n = dataset.n
    if shuffle:
        order = np.random.default_rng(seed).permutation(n)
    else:
        order = np.arange(n)
    for start in range(0, n, batch_size):
        idx = order[start:start + batch_size]
        yield Batch(dataset.images[idx], dataset.labels[idx])


# -- synthetic toy data ----------------------------------------------------

def _toy_templates(image_size, class_count):
    """Fixed per-class glyphs: coarse random binary masks, block-upsampled.

    Template identity depends only on the class index (not on the sample
    seed), so independently generated train/test splits share classes.
    """
    coarse = max(4, image_size // 4)
    zoom = max(1, image_size // coarse)
    templates = []
    for cls in range(class_count):
        salt = 0
        while True:
            rng = np.random.default_rng(90_000 + 97 * cls + salt)
            mask = (rng.random((coarse, coarse)) > 0.5).astype(np.float32)
            glyph = np.kron(mask, np.ones((zoom, zoom), dtype=np.float32))
            full = np.zeros((image_size, image_size), dtype=np.float32)
            full[:glyph.shape[0], :glyph.shape[1]] = glyph
            if not any(np.array_equal(full, t) for t in templates):
                templates.append(full)
                break
            salt += 1
    return templates


def toy_dataset(n, seed, image_size=8, class_count=10, split="train",
                noise=0.15, max_shift=None):
    """Deterministic blob-glyph classification set for CI-grade tests.

    Balanced classes; each sample is its class template rolled by a small
    random shift plus gaussian noise, clipped back into [0, 1].
    """
    if n < 1:
        raise ParameterError(f"toy dataset size must be >= 1, got {n}")
    if max_shift is None:
        max_shift = max(1, image_size // 10)
    templates = _toy_templates(image_size, class_count)
    rng = np.random.default_rng(seed)
    labels = np.arange(n, dtype=np.int64) % class_count
    images = np.empty((n, 1, image_size, image_size), dtype=np.float32)
    for i in range(n):
        shift = rng.integers(-max_shift, max_shift + 1, size=2)
        img = np.roll(templates[labels[i]], tuple(shift), axis=(0, 1))
        img = img + rng.normal(0.0, noise, img.shape).astype(np.float32)
        images[i, 0] = np.clip(img, 0.0, 1.0)
    perm = rng.permutation(n)
    return Dataset(images[perm], labels[perm], "toy", class_count, split)


# -- directory layout ------------------------------------------------------

def default_data_dir():
    return os.environ.get(DATA_DIR_ENV, "data")


def _require(path, kind):
    if not Path(path).exists():
        gz = Path(str(path) + ".gz")
        if gz.exists():
            return gz
        raise DataError(
            f"{kind} file missing: {path}\nPlace {FETCH_HINTS[kind]} under the "
            f"data directory (set {DATA_DIR_ENV} or pass --data-dir).")
    return path


def load_dataset(kind, split, data_dir=None):
    """Load a named dataset split from the conventional directory layout.

    The ``toy`` kind generates a 28x28 synthetic set compatible with the
    MNIST architecture and needs no files.
    """
    if split not in ("train", "test"):
        raise ParameterError(f"split must be train or test, got {split!r}")
    if kind == "toy":
        if split == "train":
            return toy_dataset(8192, seed=20_001, image_size=28, split="train")
        return toy_dataset(2048, seed=77_003, image_size=28, split="test")

    root = Path(data_dir or default_data_dir())
    if kind == "mnist":
        stem = "train" if split == "train" else "t10k"
        return load_mnist(
            _require(root / f"{stem}-images-idx3-ubyte", "mnist"),
            _require(root / f"{stem}-labels-idx1-ubyte", "mnist"),
            split)
    if kind == "cifar10":
        d = root / "cifar-10-batches-bin"
        if split == "train":
            paths = [_require(d / f"data_batch_{i}.bin", "cifar10") for i in range(1, 6)]
        else:
            paths = [_require(d / "test_batch.bin", "cifar10")]
        return load_cifar10(paths, split)
    if kind == "cifar100":
        d = root / "cifar-100-binary"
        name = "train.bin" if split == "train" else "test.bin"
        return load_cifar100(_require(d / name, "cifar100"), split)
    raise ParameterError(f"unknown dataset kind {kind!r}")
