"""Gaussian blob primitives: rendering, symmetrization, sampling, dictionary.

A blob is the 5-parameter additive primitive of the reconstruction:

    G(x, y) = A * exp(-(x - x0)^2 / (2*sigma1^2)) * exp(-(y - y0)^2 / (2*sigma2^2))

with x the column and y the row coordinate. sigma1 spreads the bump
horizontally (x term), sigma2 vertically (y term), so sigma2 > sigma1 gives a
vertically elongated blob. Amplitudes are signed: descent must be able to
darken as well as brighten.

Symmetrization adds a left-right mirrored copy (faces are mostly symmetric
about the vertical center axis), halving the effective search space. The
initialization dictionary is a fixed grid of symmetric blobs scored once
against the target embedding.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .canvas import GrayCanvas

__all__ = [
    "GaussianBlob",
    "SamplerConfig",
    "DictionaryGrid",
    "ZERO_BLOB",
    "render",
    "mirror_field",
    "render_symmetric",
    "render_field",
    "sample_batch",
    "build_dictionary",
    "default_dictionary_grid",
]


@dataclass(frozen=True)
class GaussianBlob:
    """Center (x0, y0) in pixels, spreads sigma1 (x) / sigma2 (y), signed amplitude."""

    x0: float
    y0: float
    sigma1: float
    sigma2: float
    amplitude: float

    def __post_init__(self):
        vals = (self.x0, self.y0, self.sigma1, self.sigma2, self.amplitude)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError(f"blob parameters must be finite, got {vals}")
        if self.sigma1 <= 0 or self.sigma2 <= 0:
            raise ValueError(f"sigma1/sigma2 must be > 0, got {self.sigma1}, {self.sigma2}")

    def as_list(self) -> list[float]:
        """[x0, y0, sigma1, sigma2, A], the trace/JSON order."""
        return [self.x0, self.y0, self.sigma1, self.sigma2, self.amplitude]


# Inert blob used as the identity candidate in a descent batch: amplitude 0
# renders to an all-zero field, so accepting it leaves the state unchanged.
ZERO_BLOB = GaussianBlob(0.0, 0.0, 1.0, 1.0, 0.0)


@dataclass(frozen=True)
class SamplerConfig:
    """Uniform sampling intervals for random blobs.

    Defaults target a 112x112 canvas: centers anywhere on the canvas, sigma in
    [2, 30] px so low frequencies dominate, amplitude signed in [-0.1, 0.1].
    """

    x0_range: tuple[float, float] = (0.0, 112.0)
    y0_range: tuple[float, float] = (0.0, 112.0)
    sigma_range: tuple[float, float] = (2.0, 30.0)
    amplitude_range: tuple[float, float] = (-0.1, 0.1)
    symmetric: bool = True
    seed: int = 0

    def __post_init__(self):
        for name in ("x0_range", "y0_range", "sigma_range", "amplitude_range"):
            lo, hi = getattr(self, name)
            if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi:
                raise ValueError(f"{name} must be a non-empty finite interval, got ({lo}, {hi})")
        if self.sigma_range[0] <= 0:
            raise ValueError(f"sigma_range must be strictly positive, got {self.sigma_range}")

    @classmethod
    def for_canvas(cls, width: int, height: int, **overrides) -> "SamplerConfig":
        """Defaults with centers spanning a width x height canvas."""
        base = dict(
            x0_range=(0.0, float(width)),
            y0_range=(0.0, float(height)),
            sigma_range=(2.0, 30.0 * min(width, height) / 112.0),
        )
        base.update(overrides)
        return cls(**base)


def _gauss_1d(n: int, center: float, sigma: float) -> np.ndarray:
    t = np.arange(n, dtype=np.float64) - center
    return np.exp(-(t * t) / (2.0 * sigma * sigma))


def render(blob: GaussianBlob, width: int, height: int) -> GrayCanvas:
    """Rasterize the blob on a width x height canvas.

    Separable: the full field is amplitude * outer(gy, gx), so |G| <= |A|
    everywhere with the max at the integer pixel nearest (x0, y0).
    """
    width, height = int(width), int(height)
    if width < 1 or height < 1:
        raise ValueError(f"canvas dimensions must be >= 1, got {width}x{height}")
    gx = _gauss_1d(width, blob.x0, blob.sigma1)
    gy = _gauss_1d(height, blob.y0, blob.sigma2)
    return GrayCanvas(blob.amplitude * np.outer(gy, gx))


def mirror_field(field: GrayCanvas) -> GrayCanvas:
    """Mirror about the vertical center axis: out(x, y) = in(width-1-x, y)."""
    return GrayCanvas(field.pixels[:, ::-1])


def render_symmetric(blob: GaussianBlob, width: int, height: int) -> GrayCanvas:
    """Render the blob plus its left-right mirrored copy: G + flip(G)."""
    g = render(blob, width, height).pixels
    return GrayCanvas(g + g[:, ::-1])


def render_field(blob: GaussianBlob, width: int, height: int, symmetric: bool) -> GrayCanvas:
    """Dispatch to the symmetric or plain renderer."""
    if symmetric:
        return render_symmetric(blob, width, height)
    return render(blob, width, height)


def sample_batch(config: SamplerConfig, rng: np.random.Generator, n: int) -> list[GaussianBlob]:
    """Draw ``n`` blobs, each parameter i.i.d. uniform over its interval.

    Deterministic given the generator state; the caller owns the stream (one
    generator per optimizer run, never shared).
    """
    n = int(n)
    if n < 1:
        raise ValueError(f"batch size must be >= 1, got {n}")
    xs = rng.uniform(*config.x0_range, size=n)
    ys = rng.uniform(*config.y0_range, size=n)
    s1 = rng.uniform(*config.sigma_range, size=n)
    s2 = rng.uniform(*config.sigma_range, size=n)
    amp = rng.uniform(*config.amplitude_range, size=n)
    return [GaussianBlob(*p) for p in zip(xs, ys, s1, s2, amp)]


@dataclass(frozen=True)
class DictionaryGrid:
    """Explicit parameter value lists whose Cartesian product is the init dictionary."""

    x0_values: tuple[float, ...]
    y0_values: tuple[float, ...]
    sigma1_values: tuple[float, ...]
    sigma2_values: tuple[float, ...]
    amplitude: float = 0.5

    def __post_init__(self):
        for name in ("x0_values", "y0_values", "sigma1_values", "sigma2_values"):
            vals = tuple(float(v) for v in getattr(self, name))
            if not vals:
                raise ValueError(f"{name} must be non-empty")
            object.__setattr__(self, name, vals)
        if any(s <= 0 for s in self.sigma1_values + self.sigma2_values):
            raise ValueError("dictionary sigma values must be > 0")

    def __len__(self) -> int:
        return (
            len(self.x0_values)
            * len(self.y0_values)
            * len(self.sigma1_values)
            * len(self.sigma2_values)
        )


def default_dictionary_grid(width: int = 112, height: int = 112) -> DictionaryGrid:
    """The default 8 x 10 x 7 x 8 = 4480-entry grid, scaled to the canvas.

    x0 spans the central half of the width (symmetric rendering covers the
    rest), y0 the full height; sigma ranges keep the bumps face-scaled.
    """
    s = min(width, height) / 112.0
    return DictionaryGrid(
        x0_values=tuple(np.linspace(width * 0.25, width * 0.75, 8)),
        y0_values=tuple(np.linspace(0.0, height - 1.0, 10)),
        sigma1_values=tuple(np.linspace(8.0 * s, 40.0 * s, 7)),
        sigma2_values=tuple(np.linspace(8.0 * s, 48.0 * s, 8)),
        amplitude=0.5,
    )


def build_dictionary(grid: DictionaryGrid) -> list[GaussianBlob]:
    """Cartesian product of the grid lists, x0 outermost / sigma2 innermost.

    Entries are meant to be rendered with ``render_symmetric``.
    """
    return [
        GaussianBlob(x0, y0, s1, s2, grid.amplitude)
        for x0, y0, s1, s2 in itertools.product(
            grid.x0_values, grid.y0_values, grid.sigma1_values, grid.sigma2_values
        )
    ]
