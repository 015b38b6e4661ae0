"""Grayscale canvas: the real-valued accumulator image the reconstruction lives in.

The canvas is an unbounded float64 accumulator. Descent is purely additive, so
nothing is clamped while optimizing; only copies that leave the process (oracle
queries, saved files) get squashed into the displayable [0, 1] range via
``clamp_unit``. 8-bit PGM (binary P5) is the canonical interchange format
because it is bit-exact and trivial to diff; PNG (8-bit single channel) is a
convenience wrapper around the same quantization.

All operations are pure: the pixel buffers are frozen at construction and every
op returns a fresh canvas, so canvases are safe to share across threads.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from PIL import Image

__all__ = [
    "GrayCanvas",
    "new_canvas",
    "from_array",
    "add_field",
    "scale_field",
    "clamp_unit",
    "save_image",
    "load_image",
]


@dataclass(frozen=True)
class GrayCanvas:
    """A width x height grayscale image with unbounded float64 pixels.

    ``pixels`` is row-major, shape (height, width), read-only. Pixel (x, y)
    means column x, row y, i.e. ``pixels[y, x]``.
    """

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"canvas pixels must be 2-D, got shape {arr.shape}")
        h, w = arr.shape
        if h < 1 or w < 1:
            raise ValueError(f"canvas dimensions must be >= 1, got {w}x{h}")
        if not np.isfinite(arr).all():
            raise ValueError("canvas pixels must all be finite")
        if arr is not self.pixels or arr.flags.writeable:
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, "pixels", arr)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def size(self) -> tuple[int, int]:
        """(width, height)."""
        return self.pixels.shape[1], self.pixels.shape[0]


def new_canvas(width: int, height: int) -> GrayCanvas:
    """All-zero canvas; the X <- 0 starting state of a recovery run."""
    width, height = int(width), int(height)
    if width < 1 or height < 1:
        raise ValueError(f"canvas dimensions must be >= 1, got {width}x{height}")
    return GrayCanvas(np.zeros((height, width), dtype=np.float64))


def from_array(pixels: np.ndarray) -> GrayCanvas:
    """Wrap a (height, width) array as a canvas (copies; validates finiteness)."""
    return GrayCanvas(np.array(pixels, dtype=np.float64))


def _check_same_size(a: GrayCanvas, b: GrayCanvas) -> None:
    if a.pixels.shape != b.pixels.shape:
        raise ValueError(
            f"canvas dimension mismatch: {a.width}x{a.height} vs {b.width}x{b.height}"
        )


def add_field(canvas: GrayCanvas, field: GrayCanvas) -> GrayCanvas:
    """Elementwise sum of two same-size canvases."""
    _check_same_size(canvas, field)
    return GrayCanvas(canvas.pixels + field.pixels)


def scale_field(canvas: GrayCanvas, factor: float) -> GrayCanvas:
    """Every pixel multiplied by ``factor`` (the fade-out step uses 0.99)."""
    factor = float(factor)
    if not np.isfinite(factor):
        raise ValueError(f"scale factor must be finite, got {factor}")
    return GrayCanvas(canvas.pixels * factor)


def clamp_unit(canvas: GrayCanvas) -> GrayCanvas:
    """Clamp pixels into [0, 1]; values already inside are unchanged."""
    return GrayCanvas(np.clip(canvas.pixels, 0.0, 1.0))


def _quantize(canvas: GrayCanvas) -> np.ndarray:
    arr = canvas.pixels
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError("canvas must be clamped to [0,1] before saving")
    return np.round(arr * 255.0).astype(np.uint8)


def save_image(canvas: GrayCanvas, path: str | os.PathLike, format: str | None = None) -> None:
    """Save as 8-bit grayscale, quantizing q = round(p * 255).

    ``format`` is "pgm8" or "png8"; inferred from the file extension when None.
    """
    path = os.fspath(path)
    if format is None:
        ext = os.path.splitext(path)[1].lower()
        format = {".pgm": "pgm8", ".png": "png8"}.get(ext)
        if format is None:
            raise ValueError(f"cannot infer image format from path {path!r}")
    q = _quantize(canvas)
    if format == "pgm8":
        with open(path, "wb") as fh:
            fh.write(encode_pgm(q))
    elif format == "png8":
        Image.fromarray(q, mode="L").save(path, format="PNG")
    else:
        raise ValueError(f"unsupported image format {format!r}")


def load_image(path: str | os.PathLike) -> GrayCanvas:
    """Load an 8-bit grayscale PGM or PNG, mapping byte q -> q/255."""
    path = os.fspath(path)
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:2] == b"P5":
        q = decode_pgm(data)
    else:
        try:
            img = Image.open(path)
        except Exception as exc:
            raise ValueError(f"unrecognized image file {path!r}: {exc}") from exc
        if img.mode != "L":
            img = img.convert("L")
        q = np.asarray(img, dtype=np.uint8)
    return GrayCanvas(q.astype(np.float64) / 255.0)


def encode_pgm(q: np.ndarray) -> bytes:
    """Encode a (height, width) uint8 array as binary PGM (P5, maxval 255)."""
    q = np.asarray(q, dtype=np.uint8)
    h, w = q.shape
    return b"P5\n%d %d\n255\n" % (w, h) + q.tobytes()


def decode_pgm(data: bytes) -> np.ndarray:
    """Decode binary PGM (P5, maxval 255) into a (height, width) uint8 array."""
    # Header: magic, width, height, maxval as whitespace-separated tokens,
    # with '#' comments allowed; raw pixels follow the single whitespace
    # character after maxval.
    if data[:2] != b"P5":
        raise ValueError("not a binary PGM (P5) file")
    pos = 2
    fields: list[int] = []
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated PGM header")
        fields.append(int(data[start:pos]))
    pos += 1  # single whitespace after maxval
    w, h, maxval = fields
    if maxval != 255:
        raise ValueError(f"unsupported PGM maxval {maxval} (expected 255)")
    raw = data[pos : pos + w * h]
    if len(raw) != w * h:
        raise ValueError("PGM pixel payload truncated")
    return np.frombuffer(raw, dtype=np.uint8).reshape(h, w)
