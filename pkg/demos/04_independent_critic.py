"""Why you should never grade reconstructions with the oracle you attacked.

Runs a batch of small recoveries against oracle A, then scores every
(original, reconstruction) pair twice: once under A and once under an
independently seeded oracle B of the same architecture. A's scores are
systematically higher because the optimizer was steering by A's own loss
surface. The honest number is B's column.
"""

import numpy as np

from blobvert import (
    DictionaryGrid,
    GaussianBlob,
    RecoveryConfig,
    SamplerConfig,
    evaluate_set,
    make_projection_oracle,
    recover,
    render,
    render_symmetric,
    sample_batch,
)

W = H = 64
N_TARGETS = 8


def random_target(idx):
    rng = np.random.default_rng(7000 + idx)
    base = GaussianBlob(
        x0=float(rng.uniform(20, 44)), y0=float(rng.uniform(20, 44)),
        sigma1=float(rng.uniform(8, 16)), sigma2=float(rng.uniform(8, 16)),
        amplitude=float(rng.uniform(0.5, 0.9)),
    )
    total = render_symmetric(base, W, H).pixels
    detail = SamplerConfig.for_canvas(W, H, symmetric=False, amplitude_range=(-0.3, 0.6))
    # details are placed without mirroring, so targets sit off the search grid
    for blob in sample_batch(detail, rng, 6):
        total = total + render(blob, W, H).pixels
    return np.clip(total, 0.0, 1.0)


def main():
    attacked = make_projection_oracle(seed=808, dim=64, input_size=(W, H), blur_sigma=1.7)
    critic = make_projection_oracle(seed=809, dim=64, input_size=(W, H), blur_sigma=1.7)
    grid = DictionaryGrid(x0_values=(20.0, 43.0), y0_values=(10.0, 31.0, 52.0),
                          sigma1_values=(5.0, 12.0), sigma2_values=(5.0, 14.0))

    pairs = []
    for i in range(N_TARGETS):
        original = random_target(i)
        target = attacked.embed_batch([original])[0]
        cfg = RecoveryConfig(query_budget=2500, batch_size=32, canvas_size=(W, H),
                             dictionary_grid=grid, seed=300 + i)
        recon, trace = recover(attacked, target, cfg)
        pairs.append((original, np.clip(recon.pixels, 0.0, 1.0)))
        print(f"target {i}: attacked-oracle cosine {trace.final_similarity:.4f}")

    report = evaluate_set(attacked, critic, pairs)
    agg = report.aggregates()
    print()
    print(f"mean cosine under attacked oracle A: {agg['attacked']['mean']:.4f}")
    print(f"mean cosine under critic oracle B:   {agg['critic']['mean']:.4f}")
    print(f"inflation gap: {agg['attacked']['mean'] - agg['critic']['mean']:+.4f}")


if __name__ == "__main__":
    main()
