import numpy as np
import pytest

from gradpath.errors import ShapeError
from gradpath.tensor import add_elementwise, matmul, pad2d


def naive_matmul(a, b):
    """Triple-loop reference multiply."""
    m, k = a.shape
    k2, n = b.shape
    assert k == k2
    out = np.zeros((m, n), dtype=np.float64)
    for i in range(m):
        for j in range(n):
            for t in range(k):
                out[i, j] += float(a[i, t]) * float(b[t, j])
    return out


def pad_reference(x, amount, mode):
    """Direct padding oracle: clamp or zero out-of-range indices."""
    b, c, h, w = x.shape
    out = np.zeros((b, c, h + 2 * amount, w + 2 * amount), dtype=x.dtype)
    for i in range(h + 2 * amount):
        for j in range(w + 2 * amount):
            si, sj = i - amount, j - amount
            if mode == "replicate":
                si, sj = min(max(si, 0), h - 1), min(max(sj, 0), w - 1)
                out[:, :, i, j] = x[:, :, si, sj]
            elif 0 <= si < h and 0 <= sj < w:
                out[:, :, i, j] = x[:, :, si, sj]
    return out


class TestMatmul:
    def test_identity(self):
        a = np.array([[1, 2], [3, 4]], dtype=np.float32)
        assert np.array_equal(matmul(a, np.eye(2, dtype=np.float32)), a)

    def test_hand_case_matches_naive_oracle(self):
        a = np.array([[1, 2], [3, 4]], dtype=np.float32)
        b = np.array([[5, 6], [7, 8]], dtype=np.float32)
        expected = np.array([[19, 22], [43, 50]], dtype=np.float32)
        assert np.array_equal(matmul(a, b), expected)
        assert np.array_equal(naive_matmul(a, b), expected)

    def test_random_matches_naive_oracle(self):
        rng = np.random.default_rng(5)
        a = rng.normal(size=(4, 7))
        b = rng.normal(size=(7, 3))
        np.testing.assert_allclose(matmul(a, b), naive_matmul(a, b), rtol=1e-12)

    def test_zeros_annihilate(self):
        a = np.random.default_rng(1).normal(size=(3, 5)).astype(np.float32)
        assert np.all(matmul(a, np.zeros((5, 2), dtype=np.float32)) == 0)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            matmul(np.ones((2, 3)), np.ones((4, 2)))
        with pytest.raises(ShapeError):
            matmul(np.ones(3), np.ones((3, 2)))


class TestAddElementwise:
    def test_additive_identity(self):
        a = np.random.default_rng(2).normal(size=(2, 3)).astype(np.float32)
        assert np.array_equal(add_elementwise(a, np.zeros_like(a)), a)

    def test_doubling(self):
        a = np.random.default_rng(3).normal(size=(4,)).astype(np.float32)
        assert np.array_equal(add_elementwise(a, a), 2 * a)

    def test_hand_sum(self):
        out = add_elementwise(np.array([1.0, -2.0, 3.0]), np.array([4.0, 5.0, -6.0]))
        assert np.array_equal(out, [5.0, 3.0, -3.0])

    def test_commutative_bitwise(self):
        rng = np.random.default_rng(4)
        a = rng.normal(size=(5, 5)).astype(np.float32)
        b = rng.normal(size=(5, 5)).astype(np.float32)
        assert np.array_equal(add_elementwise(a, b), add_elementwise(b, a))

    def test_repeatable_bitwise(self):
        rng = np.random.default_rng(6)
        a = rng.normal(size=(64,)).astype(np.float32)
        b = rng.normal(size=(64,)).astype(np.float32)
        assert np.array_equal(add_elementwise(a, b), add_elementwise(a, b))

    def test_associative_up_to_rounding(self):
        rng = np.random.default_rng(7)
        a, b, c = (rng.normal(size=(10,)).astype(np.float32) for _ in range(3))
        np.testing.assert_allclose(add_elementwise(add_elementwise(a, b), c),
                                   add_elementwise(a, add_elementwise(b, c)),
                                   rtol=1e-6, atol=1e-6)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            add_elementwise(np.ones((2, 2)), np.ones((2, 3)))


class TestPad2d:
    def test_zero_amount_is_noop(self):
        x = np.random.default_rng(8).normal(size=(1, 2, 3, 3)).astype(np.float32)
        assert np.array_equal(pad2d(x, 0), x)

    def test_single_pixel_zero_pad(self):
        x = np.full((1, 1, 1, 1), 5.0, dtype=np.float32)
        out = pad2d(x, 1, "zero")
        expected = np.zeros((1, 1, 3, 3), dtype=np.float32)
        expected[0, 0, 1, 1] = 5.0
        assert np.array_equal(out, expected)

    def test_replicate_matches_oracle(self):
        x = np.array([[[[1.0, 2.0]]]], dtype=np.float32)
        out = pad2d(x, 1, "replicate")
        assert np.array_equal(out[0, 0], [[1, 1, 2, 2], [1, 1, 2, 2], [1, 1, 2, 2]])
        rng = np.random.default_rng(9)
        y = rng.normal(size=(2, 3, 4, 5)).astype(np.float32)
        for mode in ("zero", "replicate"):
            assert np.array_equal(pad2d(y, 2, mode), pad_reference(y, 2, mode))

    def test_pad_then_crop_roundtrip(self):
        x = np.random.default_rng(10).normal(size=(2, 1, 4, 6)).astype(np.float32)
        padded = pad2d(x, 3, "zero")
        assert np.array_equal(padded[:, :, 3:7, 3:9], x)

    def test_validation(self):
        with pytest.raises(ShapeError):
            pad2d(np.ones((2, 3)), 1)
        with pytest.raises(ShapeError):
            pad2d(np.ones((1, 1, 2, 2)), -1)
        with pytest.raises(ShapeError):
            pad2d(np.ones((1, 1, 2, 2)), 1, "mirror")
