"""Dense tensor primitives.

Tensors are plain numpy arrays in row-major layout. The working precision
is 32-bit float (``DTYPE``); 64-bit arrays are used only for finite
difference gradient checking, where float32 noise would mask real bugs.
Images and feature maps follow the (batch, channels, height, width)
convention. There is no broadcasting: elementwise operations demand exact
shape equality so that mistakes surface as errors instead of silently
stretched arrays.
"""

import numpy as np

from .errors import DivergenceError, ShapeError

DTYPE = np.float32
CHECK_DTYPE = np.float64  # gradient-checking precision

PAD_MODES = ("zero", "replicate")


def matmul(a, b):
    """Matrix product of two 2-D arrays, [m,k] x [k,n] -> [m,n]."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {a.ndim}-D and {b.ndim}-D")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} x {b.shape}")
    return a @ b


def add_elementwise(a, b):
    """Elementwise sum; shapes must match exactly (no broadcasting)."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ShapeError(f"elementwise add needs equal shapes, got {a.shape} and {b.shape}")
    return a + b


def pad2d(x, amount, mode="zero"):
    """Pad the two trailing spatial axes of a (b, c, h, w) array.

    ``zero`` fills the border with zeros, ``replicate`` repeats the edge
    pixels. ``amount`` is applied on all four sides.
    """
    x = np.asarray(x)
    if x.ndim != 4:
        raise ShapeError(f"pad2d expects a (b, c, h, w) array, got shape {x.shape}")
    if amount < 0:
        raise ShapeError(f"pad amount must be non-negative, got {amount}")
    if mode not in PAD_MODES:
        raise ShapeError(f"unknown pad mode {mode!r}, expected one of {PAD_MODES}")
    if amount == 0:
        return x
    widths = ((0, 0), (0, 0), (amount, amount), (amount, amount))
    if mode == "zero":
        return np.pad(x, widths, mode="constant")
    return np.pad(x, widths, mode="edge")


def ensure_finite(x, context):
    """Raise DivergenceError if ``x`` contains NaN or Inf."""
    if not np.all(np.isfinite(x)):
        raise DivergenceError(f"non-finite values in {context}")
    return x
