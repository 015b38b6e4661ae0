"""Shared builders for test targets and instrumented oracles."""

import numpy as np

from blobvert import GaussianBlob, render


def compose_blobs(parts, width, height):
    img = np.zeros((height, width))
    for p in parts:
        img += render(p, width, height).pixels
    return np.clip(img, 0.0, 1.0)


def face_like_image(width=112, height=112):
    """Mirror-symmetric composite with face-scale structure."""
    parts = [
        GaussianBlob(55.5, 58, 26, 38, 0.85),
        GaussianBlob(38, 45, 6.5, 4.5, -0.45),
        GaussianBlob(73, 45, 6.5, 4.5, -0.45),
        GaussianBlob(38, 36, 9, 2.5, -0.2),
        GaussianBlob(73, 36, 9, 2.5, -0.2),
        GaussianBlob(55.5, 62, 4, 9, 0.35),
        GaussianBlob(55.5, 80, 11, 3.5, -0.5),
        GaussianBlob(55.5, 98, 20, 7, -0.3),
        GaussianBlob(55.5, 20, 24, 9, -0.35),
    ]
    return compose_blobs(parts, width, height)


def race_image(width=64, height=64):
    """Mostly symmetric 64x64 composite with asymmetric fine detail."""
    parts = [
        GaussianBlob(20, 18, 5, 7, 0.7),
        GaussianBlob(43, 18, 5, 7, 0.7),
        GaussianBlob(31.5, 34, 6, 5, -0.6),
        GaussianBlob(14, 44, 4, 6, 0.55),
        GaussianBlob(49, 44, 4, 6, 0.55),
        GaussianBlob(31.5, 54, 10, 4, 0.5),
        GaussianBlob(24, 8, 6, 3, -0.45),
        GaussianBlob(39, 8, 6, 3, -0.45),
    ]
    rng = np.random.default_rng(424242)
    detail = []
    for _ in range(10):
        detail.append(GaussianBlob(
            rng.uniform(0, width - 1), rng.uniform(0, height - 1),
            rng.uniform(2.0, 5.0), rng.uniform(2.0, 5.0),
            rng.uniform(-0.3, 0.3),
        ))
    return compose_blobs(parts + detail, width, height)


def random_blob_image(idx, width=64, height=64):
    """Seeded random composite; the leading blob keeps it nonblank after clipping."""
    rng = np.random.default_rng(9000 + idx)
    parts = [GaussianBlob(rng.uniform(20, 44), rng.uniform(20, 44),
                          rng.uniform(8, 16), rng.uniform(8, 16),
                          rng.uniform(0.5, 0.9))]
    for _ in range(7):
        parts.append(GaussianBlob(
            rng.uniform(4, width - 5), rng.uniform(4, height - 5),
            rng.uniform(3, 12), rng.uniform(3, 12),
            rng.uniform(-0.5, 0.6),
        ))
    return compose_blobs(parts, width, height)


def eight_bit_image(rng, shape):
    """Random image whose pixels survive the 8-bit wire quantization exactly."""
    return rng.integers(0, 256, size=shape).astype(np.float64) / 255.0


class RecordingOracle:
    """Delegating wrapper that keeps every embedding batch it returned."""

    def __init__(self, inner):
        self.inner = inner
        self.calls = []

    def embed_batch(self, images):
        out = self.inner.embed_batch(images)
        self.calls.append(out)
        return out

    def __getattr__(self, name):
        return getattr(self.inner, name)
