"""Render building blocks: single blobs, mirrored pairs, and the seed dictionary.

Writes a handful of PGM images into demos/out/ so you can eyeball what the
optimizer is allowed to paint with. Every image is a sum of anisotropic
Gaussian bumps; negative amplitudes carve darkness out of lighter regions.
"""

import os

import numpy as np

from blobvert import (
    GaussianBlob,
    GrayCanvas,
    build_dictionary,
    default_dictionary_grid,
    render,
    render_symmetric,
    save_image,
)

OUT = os.path.join(os.path.dirname(__file__), "out")
W = H = 112


def save(name, pixels):
    path = os.path.join(OUT, name)
    save_image(GrayCanvas(np.clip(pixels, 0.0, 1.0)), path)
    print(f"wrote {path}")


def main():
    os.makedirs(OUT, exist_ok=True)

    tall = GaussianBlob(x0=56, y0=72, sigma1=22, sigma2=42, amplitude=1.0)
    save("blob_tall.pgm", render(tall, W, H).pixels)

    # a mirrored off-center blob: one sample, two bumps
    off = GaussianBlob(x0=35, y0=40, sigma1=9, sigma2=14, amplitude=0.8)
    save("blob_mirrored.pgm", render_symmetric(off, W, H).pixels)

    # additive composition with a negative bump eating into a positive one
    base = render(GaussianBlob(56, 56, 30, 30, 0.9), W, H).pixels
    dent = render(GaussianBlob(56, 40, 8, 6, -0.5), W, H).pixels
    save("blob_composed.pgm", base + dent)

    grid = default_dictionary_grid(W, H)
    dictionary = build_dictionary(grid)
    print(f"default dictionary: {len(dictionary)} entries "
          f"({len(grid.x0_values)} x0 x {len(grid.y0_values)} y0 x "
          f"{len(grid.sigma1_values)} sigma1 x {len(grid.sigma2_values)} sigma2)")

    # contact sheet of every 560th entry, mirrored like the optimizer sees them
    picks = dictionary[::560][:8]
    tiles = [np.clip(render_symmetric(b, W, H).pixels, 0, 1) for b in picks]
    sheet = np.concatenate(
        [np.concatenate(tiles[:4], axis=1), np.concatenate(tiles[4:8], axis=1)], axis=0
    )
    save("dictionary_sheet.pgm", sheet)


if __name__ == "__main__":
    main()
