"""Does throwing away color cost anything? Depends on the oracle.

An oracle that collapses RGB to luma before looking at pixels cannot tell a
color image from its grayscale version: similarity is exactly 1 for every
image. An oracle wired to a single color channel is a different story. This
is the measurement that licenses searching in grayscale, which shrinks the
search space by two channels for free.
"""

import numpy as np

from blobvert import gray_tolerance, make_luma_projection_oracle

W = H = 48


def color_images(n):
    rng = np.random.default_rng(1234)
    images = [rng.random((H, W, 3)) for _ in range(n - 1)]
    flag = np.zeros((H, W, 3))
    flag[:, : W // 3, 0] = 1.0
    flag[:, W // 3 : 2 * W // 3, 1] = 1.0
    flag[:, 2 * W // 3 :, 2] = 1.0
    images.append(flag)
    return images


def main():
    images = color_images(10)

    luma = make_luma_projection_oracle(seed=99, dim=64, input_size=(W, H), blur_sigma=1.0)
    report = gray_tolerance(luma, images)
    agg = report.aggregates()
    print("luma-collapsing oracle:")
    print(f"  RGB vs gray similarity: mean {agg['mean']:.6f}, min {agg['min']:.6f} "
          f"over {agg['n_items']} images")

    red_only = make_luma_projection_oracle(seed=99, dim=64, input_size=(W, H),
                                           blur_sigma=1.0, channel_weights=(1.0, 0.0, 0.0))
    report = gray_tolerance(red_only, images)
    agg = report.aggregates()
    print("red-channel-only oracle:")
    print(f"  RGB vs gray similarity: mean {agg['mean']:.6f}, min {agg['min']:.6f}")
    print("grayscale search is safe exactly when the first number is 1.0")


if __name__ == "__main__":
    main()
