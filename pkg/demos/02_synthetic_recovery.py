"""Recover an image from nothing but its embedding, against a local oracle.

The oracle is a blurred random projection: 64x64 pixels in, 128 numbers out,
and we never look inside it. Starting from the best dictionary blob, the loop
proposes random mirrored bumps, keeps whichever candidate scores best, and
fades the initialization away. Watch the cosine climb.
"""

import os

import numpy as np

from blobvert import (
    GaussianBlob,
    GrayCanvas,
    RecoveryConfig,
    SamplerConfig,
    make_projection_oracle,
    recover,
    render,
    save_image,
    save_trace,
)

OUT = os.path.join(os.path.dirname(__file__), "out")
W = H = 64


def secret_image():
    """The image we pretend not to have: a lopsided face-ish arrangement.

    Deliberately not mirror-symmetric and not a sum the dictionary can hit,
    so the initialization only gets partway there.
    """
    parts = [
        GaussianBlob(30, 30, 14, 20, 0.85),
        GaussianBlob(22, 24, 3.5, 2.5, -0.5),
        GaussianBlob(41, 26, 4.5, 2.0, -0.55),
        GaussianBlob(33, 35, 2.0, 5.0, -0.25),
        GaussianBlob(29, 45, 7.0, 2.2, -0.45),
        GaussianBlob(14, 50, 5.0, 9.0, 0.5),
        GaussianBlob(52, 14, 9.0, 5.0, 0.4),
    ]
    total = np.linspace(0.0, 0.25, W)[None, :] * np.ones((H, 1))
    for blob in parts:
        total = total + render(blob, W, H).pixels
    return np.clip(total, 0.0, 1.0)


def main():
    os.makedirs(OUT, exist_ok=True)
    oracle = make_projection_oracle(seed=404, dim=128, input_size=(W, H), blur_sigma=1.5)

    secret = secret_image()
    save_image(GrayCanvas(secret), os.path.join(OUT, "secret.pgm"))
    target = oracle.embed_batch([secret])[0]
    print(f"target embedding: {target.dim} numbers; the image itself is now forgotten")

    # the secret is lopsided, so search without the mirror
    cfg = RecoveryConfig(
        query_budget=8000, batch_size=32, canvas_size=(W, H), seed=7,
        sampler=SamplerConfig.for_canvas(W, H, symmetric=False),
    )
    recon, trace = recover(oracle, target, cfg)

    print(f"dictionary init: {trace.init_queries} queries, cosine {trace.init_cosine:.3f}")
    for rec in trace.records[::25]:
        print(f"  iter {rec.iteration:4d}  queries {rec.queries_used:6d}  cosine {rec.cosine:.4f}")
    print(f"final: {trace.total_queries} queries, cosine {trace.final_similarity:.4f}")

    save_image(GrayCanvas(np.clip(recon.pixels, 0, 1)), os.path.join(OUT, "recovered.pgm"))
    save_trace(trace, os.path.join(OUT, "recovery_trace.jsonl"))
    print(f"compare {OUT}/secret.pgm with {OUT}/recovered.pgm")


if __name__ == "__main__":
    main()
