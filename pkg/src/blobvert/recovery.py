"""Zero-order recovery loop: initialize, sample, score, accept, fade.

One iteration: sample a batch of random blobs, add each to the current state
on top of the fading initialization, clamp the oracle-facing copies, embed the
batch, keep the argmin-loss candidate, then decay the initialization by the
fade factor. The accumulator itself is never clamped, so the descent history
stays exact. After the budget is exhausted the faded initialization is folded
into the output.

Initialization either scans a fixed dictionary of symmetric blobs for the best
cosine match (charged against the query budget) or loads a predefined face
image, in which case the loss drops its norm term and runs cosine-only.

Every run is deterministic given (config seed, oracle seed) and produces a
RunTrace whose per-iteration records replay exactly.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .blobs import (
    ZERO_BLOB,
    DictionaryGrid,
    GaussianBlob,
    SamplerConfig,
    build_dictionary,
    default_dictionary_grid,
    render_field,
    render_symmetric,
    sample_batch,
)
from .canvas import GrayCanvas, load_image
from .objective import LossParams, cosine_similarity, loss, select_best
from .oracle import Embedding, OracleError

__all__ = [
    "RecoveryConfig",
    "IterationRecord",
    "RunTrace",
    "init_dictionary_search",
    "init_face",
    "recover",
    "save_trace",
    "load_trace_records",
]

INIT_MODES = ("dictionary", "face_image")

DICT_CHUNK = 256  # dictionary entries embedded per oracle call (bounds memory)


@dataclass(frozen=True)
class RecoveryConfig:
    """Everything a recovery run depends on, seeds included."""

    query_budget: int
    batch_size: int = 64
    canvas_size: tuple[int, int] = (112, 112)
    loss_params: LossParams = LossParams()
    sampler: SamplerConfig | None = None
    fade_factor: float = 0.99
    init_mode: str = "dictionary"
    init_face: str | None = None
    resize_init_face: bool = False
    dictionary_grid: DictionaryGrid | None = None
    cosine_only: bool | None = None
    include_identity_candidate: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.query_budget < 0:
            raise ValueError(f"query budget must be >= 0, got {self.query_budget}")
        if self.batch_size < 1:
            raise ValueError(f"batch size must be >= 1, got {self.batch_size}")
        if not (0.0 < self.fade_factor <= 1.0):
            raise ValueError(f"fade factor must be in (0, 1], got {self.fade_factor}")
        if self.init_mode not in INIT_MODES:
            raise ValueError(f"init_mode must be one of {INIT_MODES}, got {self.init_mode!r}")
        if self.init_mode == "face_image" and not self.init_face:
            raise ValueError("face_image init requires init_face path")
        w, h = self.canvas_size
        if w < 1 or h < 1:
            raise ValueError(f"canvas_size must be positive, got {self.canvas_size}")

    def resolved_sampler(self) -> SamplerConfig:
        if self.sampler is not None:
            return self.sampler
        return SamplerConfig.for_canvas(*self.canvas_size)

    def resolved_grid(self) -> DictionaryGrid:
        if self.dictionary_grid is not None:
            return self.dictionary_grid
        return default_dictionary_grid(*self.canvas_size)

    def resolved_cosine_only(self) -> bool:
        if self.cosine_only is None:
            return self.init_mode == "face_image"
        return self.cosine_only


@dataclass(frozen=True)
class IterationRecord:
    """One accepted step: cumulative queries, batch-best loss, accepted blob."""

    iteration: int
    queries_used: int
    best_loss: float
    cosine: float
    blob: GaussianBlob

    def to_json_obj(self) -> dict:
        return {
            "iter": self.iteration,
            "queries": self.queries_used,
            "loss": self.best_loss,
            "cos": self.cosine,
            "blob": self.blob.as_list(),
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "IterationRecord":
        return cls(
            iteration=int(obj["iter"]),
            queries_used=int(obj["queries"]),
            best_loss=float(obj["loss"]),
            cosine=float(obj["cos"]),
            blob=GaussianBlob(*obj["blob"]),
        )


@dataclass
class RunTrace:
    """Per-iteration history plus the run summary."""

    records: list[IterationRecord] = field(default_factory=list)
    init_queries: int = 0
    init_cosine: float | None = None
    total_queries: int = 0
    final_similarity: float | None = None
    error: str | None = None

    def summary(self) -> dict:
        return {
            "total_queries": self.total_queries,
            "final_similarity": self.final_similarity,
            "iterations": len(self.records),
            "init_queries": self.init_queries,
            "init_cosine": self.init_cosine,
            "error": self.error,
        }


def save_trace(trace: RunTrace, path) -> None:
    """Write per-iteration records as line-delimited JSON."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in trace.records:
            fh.write(json.dumps(rec.to_json_obj()) + "\n")


def load_trace_records(path) -> list[IterationRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(IterationRecord.from_json_obj(json.loads(line)))
    return records


def _dictionary_search(oracle, target, dictionary, canvas_size, chunk=DICT_CHUNK):
    """Score every dictionary blob by cosine against the target.

    Returns (best index, best cosine, G0 pixels, queries used). Entries are
    rendered symmetrically, clamped for the oracle, and embedded in chunks.
    """
    if not dictionary:
        raise ValueError("dictionary must be non-empty")
    w, h = canvas_size
    cosines = np.empty(len(dictionary))
    for start in range(0, len(dictionary), chunk):
        part = dictionary[start : start + chunk]
        batch = np.stack([render_symmetric(b, w, h).pixels for b in part])
        embeddings = oracle.embed_batch(np.clip(batch, 0.0, 1.0))
        for j, emb in enumerate(embeddings):
            cosines[start + j] = cosine_similarity(target, emb)
    best = int(np.argmax(cosines))  # first max wins ties
    g0 = render_symmetric(dictionary[best], w, h).pixels
    return best, float(cosines[best]), g0, len(dictionary)


def init_dictionary_search(oracle, target, dictionary, canvas_size):
    """Best symmetric dictionary blob by cosine similarity to the target.

    Returns (G0 canvas, queries used); queries used equals the dictionary size.
    """
    _, _, g0, used = _dictionary_search(oracle, target, dictionary, canvas_size)
    return GrayCanvas(g0), used


def init_face(path, canvas_size, resize: bool = False) -> GrayCanvas:
    """Load a predefined image as the fading initialization."""
    canvas = load_image(path)
    w, h = canvas_size
    if canvas.size != (w, h):
        if not resize:
            raise ValueError(
                f"init face {os.fspath(path)!r} is {canvas.width}x{canvas.height}, "
                f"expected {w}x{h} (resize disabled)"
            )
        img = Image.fromarray(canvas.pixels.astype(np.float32), mode="F")
        resized = img.resize((w, h), Image.BILINEAR)
        canvas = GrayCanvas(np.asarray(resized, dtype=np.float64))
    return canvas


def recover(oracle, target: Embedding, config: RecoveryConfig):
    """Run the full recovery loop; returns (reconstruction, trace).

    Oracle failures mid-run abort cleanly: the partial state (with the faded
    initialization folded in) and the trace so far come back with
    ``trace.error`` set.
    """
    w, h = config.canvas_size
    input_size = getattr(oracle, "input_size", None)
    if input_size is not None and tuple(input_size) != (w, h):
        raise ValueError(f"oracle expects input size {input_size}, config canvas is {(w, h)}")

    sampler = config.resolved_sampler()
    lp = LossParams(0.0) if config.resolved_cosine_only() else config.loss_params

    trace = RunTrace()
    X = np.zeros((h, w), dtype=np.float64)

    if config.init_mode == "dictionary":
        dictionary = build_dictionary(config.resolved_grid())
        if config.query_budget < len(dictionary):
            raise ValueError(
                f"budget {config.query_budget} cannot cover dictionary "
                f"initialization ({len(dictionary)} queries)"
            )
        _, init_cos, G0, used = _dictionary_search(oracle, target, dictionary, (w, h))
        trace.init_queries = used
        trace.init_cosine = init_cos
    else:
        G0 = init_face(config.init_face, (w, h), resize=config.resize_init_face).pixels
        used = 0

    rng = np.random.default_rng(config.seed)
    n_random = config.batch_size - (1 if config.include_identity_candidate else 0)

    try:
        while used + config.batch_size <= config.query_budget:
            blobs: list[GaussianBlob] = []
            if config.include_identity_candidate:
                blobs.append(ZERO_BLOB)
            if n_random > 0:
                blobs.extend(sample_batch(sampler, rng, n_random))
            fields = np.stack(
                [render_field(b, w, h, sampler.symmetric).pixels for b in blobs]
            )
            base = X + G0
            batch = np.clip(base[None, :, :] + fields, 0.0, 1.0)
            embeddings = oracle.embed_batch(batch)
            losses = [loss(target, emb, lp) for emb in embeddings]
            ind = select_best(losses)
            X = X + fields[ind]
            G0 = G0 * config.fade_factor
            used += config.batch_size
            trace.records.append(
                IterationRecord(
                    iteration=len(trace.records),
                    queries_used=used,
                    best_loss=losses[ind],
                    cosine=cosine_similarity(target, embeddings[ind]),
                    blob=blobs[ind],
                )
            )
    except OracleError as exc:
        trace.error = str(exc)

    trace.total_queries = used
    if trace.records:
        trace.final_similarity = trace.records[-1].cosine
    else:
        trace.final_similarity = trace.init_cosine
    return GrayCanvas(X + G0), trace
