"""Independent-critic evaluation and the grayscale-tolerance harness.

Scoring reconstructions with the attacked oracle itself inflates similarity
(the optimizer was minimizing against exactly that map), so reports always
carry two columns: the attacked oracle and an independently-constructed
critic. The gap between the columns is the dependent-critic inflation made
visible.

The grayscale-tolerance harness measures how much an oracle's embedding moves
when a color image is collapsed to luma, which is the experiment that
justifies recovering in grayscale in the first place.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .canvas import GrayCanvas
from .objective import cosine_similarity
from .oracle import LUMA_WEIGHTS, reduce_channels

__all__ = [
    "EvalReport",
    "GrayToleranceReport",
    "evaluate_set",
    "gray_tolerance",
    "to_luma",
]


def to_luma(image: np.ndarray) -> np.ndarray:
    """(H, W, 3) -> (H, W) using fixed weights 0.299/0.587/0.114.

    An image whose channels are already identical maps to channel 0 exactly.
    """
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[-1] != 3:
        raise ValueError(f"expected an (H, W, 3) image, got shape {arr.shape}")
    return reduce_channels(arr[None], LUMA_WEIGHTS)[0]


def _histogram(values: np.ndarray, bins: int) -> tuple[list[int], list[float]]:
    counts, edges = np.histogram(values, bins=bins, range=(-1.0, 1.0))
    return counts.tolist(), edges.tolist()


@dataclass
class EvalReport:
    """Per-pair cosines under both oracles plus recomputable aggregates."""

    attacked_cos: np.ndarray
    critic_cos: np.ndarray
    bins: int = 20

    def __post_init__(self):
        self.attacked_cos = np.asarray(self.attacked_cos, dtype=np.float64)
        self.critic_cos = np.asarray(self.critic_cos, dtype=np.float64)
        if self.attacked_cos.shape != self.critic_cos.shape:
            raise ValueError("attacked and critic columns must have equal length")

    @property
    def n_items(self) -> int:
        return self.attacked_cos.shape[0]

    def aggregates(self) -> dict:
        out = {}
        for name, col in (("attacked", self.attacked_cos), ("critic", self.critic_cos)):
            counts, edges = _histogram(col, self.bins)
            out[name] = {
                "mean": float(col.mean()),
                "median": float(np.median(col)),
                "histogram": counts,
                "bin_edges": edges,
            }
        out["n_items"] = self.n_items
        return out

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["index", "attacked_cos", "critic_cos"])
            for i in range(self.n_items):
                writer.writerow(
                    [i, repr(float(self.attacked_cos[i])), repr(float(self.critic_cos[i]))]
                )

    def write_summary(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.aggregates(), fh, indent=2)
            fh.write("\n")


def evaluate_set(attacked_oracle, critic_oracle, pairs, bins: int = 20) -> EvalReport:
    """Cosine between embed(original) and embed(reconstruction) per oracle.

    ``pairs`` is a non-empty list of (original, reconstruction) images sized
    for both oracles.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("pairs must be non-empty")
    originals = [p[0] for p in pairs]
    recons = [p[1] for p in pairs]
    columns = {}
    for name, oracle in (("attacked", attacked_oracle), ("critic", critic_oracle)):
        emb_orig = oracle.embed_batch(originals)
        emb_recon = oracle.embed_batch(recons)
        columns[name] = np.array(
            [cosine_similarity(o, r) for o, r in zip(emb_orig, emb_recon)]
        )
    return EvalReport(columns["attacked"], columns["critic"], bins=bins)


@dataclass
class GrayToleranceReport:
    """Per-image RGB-vs-luma similarity under one oracle."""

    similarities: np.ndarray
    bins: int = 20

    def __post_init__(self):
        self.similarities = np.asarray(self.similarities, dtype=np.float64)

    def aggregates(self) -> dict:
        counts, edges = _histogram(self.similarities, self.bins)
        return {
            "n_items": int(self.similarities.shape[0]),
            "mean": float(self.similarities.mean()),
            "median": float(np.median(self.similarities)),
            "min": float(self.similarities.min()),
            "histogram": counts,
            "bin_edges": edges,
        }

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["index", "similarity"])
            for i, v in enumerate(self.similarities):
                writer.writerow([i, repr(float(v))])

    def write_summary(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.aggregates(), fh, indent=2)
            fh.write("\n")


def gray_tolerance(oracle, rgb_images, bins: int = 20) -> GrayToleranceReport:
    """Cosine between embed(RGB) and embed(luma replicated to 3 channels).

    The oracle must accept 3-channel input. No quantization is applied, so an
    already-gray image scores exactly 1.
    """
    rgb_images = list(rgb_images)
    if not rgb_images:
        raise ValueError("rgb_images must be non-empty")
    grays = []
    for img in rgb_images:
        arr = img.pixels if isinstance(img, GrayCanvas) else np.asarray(img, dtype=np.float64)
        if arr.ndim == 2:  # already grayscale: replicate as-is
            luma = arr
        else:
            luma = to_luma(arr)
        grays.append(np.repeat(luma[:, :, None], 3, axis=2))
    emb_rgb = oracle.embed_batch(rgb_images)
    emb_gray = oracle.embed_batch(grays)
    sims = np.array([cosine_similarity(a, b) for a, b in zip(emb_rgb, emb_gray)])
    return GrayToleranceReport(sims, bins=bins)
