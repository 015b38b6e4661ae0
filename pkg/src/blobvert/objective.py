"""Selection criterion: cosine similarity and the norm-penalized loss.

The loss scored against the target embedding y for a candidate y' is

    L(y, y') = lam * (||y|| - ||y'||)^2 - s(y, y')

with s the cosine similarity and lam a small weight (default 0.0025) that
keeps candidate norms near the target's. Lower is better; the minimum -1 is
attained exactly when norms match and the vectors are positively collinear.
Cosine-only mode is lam = 0, which makes the loss exactly -s.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import sqrt
from typing import Sequence

import numpy as np

from .oracle import Embedding

__all__ = ["LossParams", "cosine_similarity", "loss", "select_best"]

DEFAULT_LAMBDA = 0.0025


@dataclass(frozen=True)
class LossParams:
    """Weight of the norm-mismatch term; 0 disables it (cosine-only loss)."""

    lam: float = DEFAULT_LAMBDA

    def __post_init__(self):
        if not np.isfinite(self.lam) or self.lam < 0:
            raise ValueError(f"lambda must be finite and >= 0, got {self.lam}")


def _values(e: Embedding | np.ndarray) -> np.ndarray:
    return e.values if isinstance(e, Embedding) else np.asarray(e, dtype=np.float64)


def cosine_similarity(a: Embedding | np.ndarray, b: Embedding | np.ndarray) -> float:
    """dot(a, b) / (||a|| * ||b||), in [-1, 1].

    Computed as dot / sqrt(dot(a,a) * dot(b,b)) so identical inputs score
    exactly 1.0. Zero-norm inputs are an error: a zero embedding from a linear
    oracle means a blank image, i.e. a misconfigured run.
    """
    va, vb = _values(a), _values(b)
    if va.shape != vb.shape:
        raise ValueError(f"embedding dim mismatch: {va.shape[0]} vs {vb.shape[0]}")
    na2 = float(np.dot(va, va))
    nb2 = float(np.dot(vb, vb))
    if na2 == 0.0 or nb2 == 0.0:
        raise ValueError("cosine similarity undefined for zero-norm embedding")
    return float(np.dot(va, vb)) / sqrt(na2 * nb2)


def loss(
    target: Embedding | np.ndarray,
    candidate: Embedding | np.ndarray,
    params: LossParams = LossParams(),
) -> float:
    """lam * (||target|| - ||candidate||)^2 - cosine(target, candidate)."""
    s = cosine_similarity(target, candidate)
    vt, vc = _values(target), _values(candidate)
    gap = sqrt(float(np.dot(vt, vt))) - sqrt(float(np.dot(vc, vc)))
    return params.lam * gap * gap - s


def select_best(losses: Sequence[float]) -> int:
    """Index of the minimum loss; ties break to the lowest index."""
    arr = np.asarray(losses, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("losses must be a non-empty 1-D sequence")
    if not np.isfinite(arr).all():
        raise ValueError("losses must all be finite")
    return int(np.argmin(arr))
