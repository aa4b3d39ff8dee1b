"""Image-gradient input transform (the parameter-free "lambda" stage).

Every pixel of the input image is replaced by the sum of its horizontal
and vertical intensity derivatives, estimated with central differences in
the interior and one-sided differences at the borders. The output has the
same shape as the input, so the same convolutional trunk accepts both the
original image and its gradient form. Color channels are treated
independently.

The transform is plumbing in front of the trainable stack: inputs are
leaves, so no gradient flows back through it and it needs no backward.
"""

import numpy as np

from .errors import ShapeError


def _check_image(image):
    image = np.asarray(image)
    if image.ndim != 4:
        raise ShapeError(f"expected a (b, c, h, w) image batch, got shape {image.shape}")
    b, c, h, w = image.shape
    if h < 2 or w < 2:
        raise ShapeError(f"spatial gradients need h >= 2 and w >= 2, got {h}x{w}")
    return image


def spatial_gradients(image):
    """Per-pixel finite differences along width (dx) and height (dy).

    Interior pixels use the central estimate (I[i+1] - I[i-1]) / 2; the
    first and last row/column fall back to the one-sided difference of the
    two nearest pixels. Returns (dx, dy), each shaped like ``image``.
    """
    image = _check_image(image)
    dx = np.empty_like(image)
    dy = np.empty_like(image)

    dx[..., :, 1:-1] = (image[..., :, 2:] - image[..., :, :-2]) * 0.5
    dx[..., :, 0] = image[..., :, 1] - image[..., :, 0]
    dx[..., :, -1] = image[..., :, -1] - image[..., :, -2]

    dy[..., 1:-1, :] = (image[..., 2:, :] - image[..., :-2, :]) * 0.5
    dy[..., 0, :] = image[..., 1, :] - image[..., 0, :]
    dy[..., -1, :] = image[..., -1, :] - image[..., -2, :]

    return dx, dy


def gradient_transform(image):
    """Replace every pixel with dx + dy. The source image is untouched."""
    dx, dy = spatial_gradients(image)
    return dx + dy
