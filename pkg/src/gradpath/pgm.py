"""Minimal binary PGM (P5) reader/writer for the transform command."""

import numpy as np

from .errors import DataError, FormatError


def _tokens(buf):
    """Yield (token, offset) over the PGM header, skipping '#' comments."""
    i = 0
    while i < len(buf):
        c = buf[i:i + 1]
        if c.isspace():
            i += 1
        elif c == b"#":
            while i < len(buf) and buf[i:i + 1] != b"\n":
                i += 1
        else:
            start = i
            while i < len(buf) and not buf[i:i + 1].isspace():
                i += 1
            yield buf[start:i], start, i
            i += 1  # single whitespace byte after a token


def read_pgm(path):
    """Read a binary (P5) PGM with maxval <= 255; returns (h, w) uint8."""
    try:
        with open(path, "rb") as f:
            buf = f.read()
    except FileNotFoundError:
        raise DataError(f"image file not found: {path}") from None
    tok = _tokens(buf)
    try:
        magic, off, _ = next(tok)
        if magic != b"P5":
            raise FormatError(f"{path}: not a binary PGM (magic {magic!r})", offset=off)
        fields = []
        for _ in range(3):
            raw, off, end = next(tok)
            if not raw.isdigit():
                raise FormatError(f"{path}: bad header token {raw!r}", offset=off)
            fields.append((int(raw), end))
    except StopIteration:
        raise FormatError(f"{path}: truncated PGM header", offset=len(buf)) from None
    (w, _), (h, _), (maxval, header_end) = fields
    if maxval == 0 or maxval > 255:
        raise FormatError(f"{path}: unsupported maxval {maxval}", offset=off)
    data_start = header_end + 1  # exactly one whitespace byte after maxval
    if len(buf) - data_start < w * h:
        raise FormatError(f"{path}: raster holds {len(buf) - data_start} bytes, "
                          f"needs {w * h}", offset=len(buf))
    pixels = np.frombuffer(buf, dtype=np.uint8, count=w * h, offset=data_start)
    return pixels.reshape(h, w)


def write_pgm(path, image):
    """Write a (h, w) uint8 array as binary PGM."""
    image = np.asarray(image, dtype=np.uint8)
    if image.ndim != 2:
        raise FormatError(f"PGM writer expects a 2-D array, got shape {image.shape}")
    h, w = image.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(image.tobytes())
