"""Shared helpers: format-exact synthetic dataset files for loader tests."""

import struct

import numpy as np
import pytest


def make_idx_images(pixels):
    """Pack a (n, h, w) uint8 array as an IDX image file (big endian)."""
    n, h, w = pixels.shape
    return struct.pack(">IIII", 0x803, n, h, w) + pixels.tobytes()


def make_idx_labels(labels):
    return struct.pack(">II", 0x801, len(labels)) + bytes(labels)


def make_cifar10_file(labels, pixels):
    """Pack (n,) labels and (n, 3, 32, 32) uint8 pixels as 3073-byte records."""
    n = len(labels)
    rows = np.empty((n, 3073), dtype=np.uint8)
    rows[:, 0] = labels
    rows[:, 1:] = pixels.reshape(n, -1)
    return rows.tobytes()


def make_cifar100_file(coarse, fine, pixels):
    n = len(fine)
    rows = np.empty((n, 3074), dtype=np.uint8)
    rows[:, 0] = coarse
    rows[:, 1] = fine
    rows[:, 2:] = pixels.reshape(n, -1)
    return rows.tobytes()


@pytest.fixture
def mnist_pair(tmp_path):
    """Small valid MNIST file pair on disk; returns (image_path, label_path, pixels, labels)."""
    rng = np.random.default_rng(0)
    pixels = rng.integers(0, 256, size=(7, 28, 28), dtype=np.uint8)
    labels = np.array([0, 1, 2, 9, 4, 5, 3], dtype=np.uint8)
    ip = tmp_path / "imgs-idx3-ubyte"
    lp = tmp_path / "labs-idx1-ubyte"
    ip.write_bytes(make_idx_images(pixels))
    lp.write_bytes(make_idx_labels(labels))
    return ip, lp, pixels, labels
