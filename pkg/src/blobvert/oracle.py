"""The black-box boundary: image batches in, embeddings out, every image counted.

An oracle is anything that maps images to embedding vectors through its
input/output interface alone. Two synthetic in-process kinds make the engine
testable at desk scale:

  * ``projection``:      Gaussian blur then a fixed seed-derived random
                         projection of the flattened grayscale image. The blur
                         keeps low frequencies dominant, so coarse blobs are
                         informative and high-frequency noise is attenuated.
  * ``luma_projection``: same pipeline on the luma plane of a 3-channel
                         input; provably ignores chroma.

The ``remote`` kind is an HTTP client speaking the wire protocol below, the
true deployment boundary where no model internals exist:

    POST /embed   {"images": [<base64 of 8-bit PGM or PNG bytes>, ...]}
              ->  {"dim": n, "embeddings": [[f64, ...], ...]}
    GET  /ledger  ->  {"images_sent": n}

Embeddings are deliberately left unnormalized so the norm term of the loss
stays meaningful. Every oracle owns a QueryLedger counting images consumed;
the ledger is the ground truth for query-budget claims.
"""

from __future__ import annotations

import base64
import io
import struct
import threading
from dataclasses import dataclass, field

import numpy as np
import requests
from scipy.ndimage import gaussian_filter

from .canvas import GrayCanvas, encode_pgm

__all__ = [
    "Embedding",
    "QueryLedger",
    "OracleSpec",
    "OracleError",
    "OracleTransportError",
    "OracleProtocolError",
    "ProjectionOracle",
    "LumaProjectionOracle",
    "RemoteOracle",
    "make_projection_oracle",
    "make_luma_projection_oracle",
    "make_remote_oracle",
    "make_oracle",
    "embed_batch",
    "reduce_channels",
    "read_embedding",
    "write_embedding",
    "LUMA_WEIGHTS",
]

LUMA_WEIGHTS = (0.299, 0.587, 0.114)

SYNTHETIC_KINDS = ("projection", "luma_projection")
ORACLE_KINDS = SYNTHETIC_KINDS + ("remote",)


class OracleError(Exception):
    """Base class for oracle failures."""


class OracleTransportError(OracleError):
    """The remote peer could not be reached (connection refused, timeout)."""


class OracleProtocolError(OracleError):
    """The peer answered, but outside the protocol (bad payload, dim drift)."""


@dataclass(frozen=True)
class Embedding:
    """A finite real vector produced by an oracle."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError(f"embedding must be a non-empty 1-D vector, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("embedding values must all be finite")
        if arr is not self.values or arr.flags.writeable:
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, "values", arr)

    @property
    def dim(self) -> int:
        return self.values.shape[0]


class QueryLedger:
    """Monotone, thread-safe count of images consumed by an oracle."""

    def __init__(self):
        self._lock = threading.Lock()
        self._images_sent = 0

    @property
    def images_sent(self) -> int:
        return self._images_sent

    def count(self, n: int) -> None:
        if n < 0:
            raise ValueError("ledger increments must be non-negative")
        with self._lock:
            self._images_sent += n


@dataclass(frozen=True)
class OracleSpec:
    """Declarative description of an oracle, loadable from config files.

    ``seed``, ``dim``, ``input_size``, ``blur_sigma`` and ``channel_weights``
    apply to the synthetic kinds; ``endpoint`` to the remote kind.
    """

    kind: str
    seed: int = 0
    dim: int = 128
    input_size: tuple[int, int] = (112, 112)
    blur_sigma: float = 0.0
    endpoint: str | None = None
    channel_weights: tuple[float, float, float] = LUMA_WEIGHTS

    def __post_init__(self):
        if self.kind not in ORACLE_KINDS:
            raise ValueError(f"unknown oracle kind {self.kind!r}, expected one of {ORACLE_KINDS}")
        if self.kind == "remote":
            if not self.endpoint:
                raise ValueError("remote oracle spec requires an endpoint URL")
        else:
            if self.dim < 2:
                raise ValueError(f"oracle dim must be >= 2, got {self.dim}")
            if self.blur_sigma < 0:
                raise ValueError(f"blur_sigma must be >= 0, got {self.blur_sigma}")
            w, h = self.input_size
            if w < 1 or h < 1:
                raise ValueError(f"input_size must be positive, got {self.input_size}")

    @classmethod
    def from_mapping(cls, data: dict) -> "OracleSpec":
        """Build from a parsed config table (TOML/JSON)."""
        known = {"kind", "seed", "dim", "input_size", "blur_sigma", "endpoint", "channel_weights"}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown oracle spec keys: {sorted(unknown)}")
        kwargs = dict(data)
        if "input_size" in kwargs:
            kwargs["input_size"] = tuple(int(v) for v in kwargs["input_size"])
        if "channel_weights" in kwargs:
            kwargs["channel_weights"] = tuple(float(v) for v in kwargs["channel_weights"])
        return cls(**kwargs)

    def to_mapping(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "remote":
            out["endpoint"] = self.endpoint
        else:
            out.update(
                seed=self.seed,
                dim=self.dim,
                input_size=list(self.input_size),
                blur_sigma=self.blur_sigma,
            )
            if self.kind == "luma_projection":
                out["channel_weights"] = list(self.channel_weights)
        return out


def reduce_channels(batch: np.ndarray, weights=LUMA_WEIGHTS) -> np.ndarray:
    """(B, H, W, 3) -> (B, H, W) weighted channel sum.

    Images whose three channels are elementwise identical reduce to channel 0
    exactly, so a grayscale image replicated to 3 channels embeds bit-identically
    to its single-channel form (the float weights do not sum to exactly 1).
    """
    c0, c1, c2 = batch[..., 0], batch[..., 1], batch[..., 2]
    out = c0 * weights[0] + c1 * weights[1] + c2 * weights[2]
    gray = (c1 == c0).all(axis=(-2, -1)) & (c2 == c0).all(axis=(-2, -1))
    if gray.any():
        out[gray] = c0[gray]
    return out


def _stack_images(images, channels: int) -> np.ndarray:
    """Canonicalize a batch into (B, H, W) or (B, H, W, 3) float64 in [0, 1]."""
    if isinstance(images, np.ndarray) and images.ndim in (3, 4):
        batch = np.asarray(images, dtype=np.float64)
    else:
        planes = []
        for img in images:
            arr = img.pixels if isinstance(img, GrayCanvas) else np.asarray(img, dtype=np.float64)
            if channels == 3 and arr.ndim == 2:
                arr = np.repeat(arr[:, :, None], 3, axis=2)
            planes.append(arr)
        if not planes:
            raise ValueError("image batch must be non-empty")
        shapes = {p.shape for p in planes}
        if len(shapes) > 1:
            raise ValueError(f"image batch has mixed shapes: {sorted(shapes)}")
        batch = np.stack(planes).astype(np.float64)
    if batch.shape[0] == 0:
        raise ValueError("image batch must be non-empty")
    if channels == 1:
        if batch.ndim != 3:
            raise ValueError(f"oracle expects single-channel images, got batch shape {batch.shape}")
    else:
        if batch.ndim == 3:
            batch = np.repeat(batch[..., None], 3, axis=-1)  # gray fed to an RGB model
        elif batch.ndim != 4 or batch.shape[-1] != 3:
            raise ValueError(f"oracle expects 3-channel images, got batch shape {batch.shape}")
    if not np.isfinite(batch).all():
        raise ValueError("image batch contains non-finite pixels")
    if batch.min() < 0.0 or batch.max() > 1.0:
        raise ValueError("image pixels must lie in [0, 1]; clamp before embedding")
    return batch


class _SyntheticOracle:
    """Shared blur + random-projection pipeline behind both synthetic kinds."""

    channels = 1

    def __init__(self, seed: int, dim: int, input_size: tuple[int, int], blur_sigma: float):
        if dim < 2:
            raise ValueError(f"oracle dim must be >= 2, got {dim}")
        if blur_sigma < 0:
            raise ValueError(f"blur_sigma must be >= 0, got {blur_sigma}")
        w, h = int(input_size[0]), int(input_size[1])
        if w < 1 or h < 1:
            raise ValueError(f"input_size must be positive, got {input_size}")
        self.seed = int(seed)
        self.dim = int(dim)
        self.input_size = (w, h)
        self.blur_sigma = float(blur_sigma)
        self.ledger = QueryLedger()
        npix = w * h
        rng = np.random.default_rng(self.seed)
        self._matrix = rng.standard_normal((self.dim, npix)) / np.sqrt(npix)

    def _to_planes(self, batch: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def embed_batch(self, images) -> list[Embedding]:
        batch = _stack_images(images, self.channels)
        w, h = self.input_size
        if batch.shape[1] != h or batch.shape[2] != w:
            raise ValueError(
                f"oracle expects {w}x{h} images, got {batch.shape[2]}x{batch.shape[1]}"
            )
        planes = self._to_planes(batch)
        if self.blur_sigma > 0:
            planes = gaussian_filter(planes, sigma=(0.0, self.blur_sigma, self.blur_sigma))
        flat = planes.reshape(planes.shape[0], -1)
        # one projection call per image: an image's embedding must not depend
        # on what else shares the batch (batched matmul reorders accumulation)
        vectors = [self._matrix @ v for v in flat]
        self.ledger.count(batch.shape[0])
        return [Embedding(v) for v in vectors]


class ProjectionOracle(_SyntheticOracle):
    """Blur + random projection of grayscale images; rejects 3-channel input."""

    channels = 1

    def _to_planes(self, batch: np.ndarray) -> np.ndarray:
        return batch


class LumaProjectionOracle(_SyntheticOracle):
    """Channel-weighted reduction (luma by default) before blur + projection.

    Accepts 3-channel input, or single-channel input used as the plane
    directly, so gray images embed identically in either form.
    """

    channels = 3

    def __init__(self, seed, dim, input_size, blur_sigma=0.0, channel_weights=LUMA_WEIGHTS):
        super().__init__(seed, dim, input_size, blur_sigma)
        self.channel_weights = tuple(float(v) for v in channel_weights)

    def _to_planes(self, batch: np.ndarray) -> np.ndarray:
        return reduce_channels(batch, self.channel_weights)


class RemoteOracle:
    """HTTP client for the /embed + /ledger wire protocol.

    Batches larger than ``max_batch`` are split into multiple requests.
    Transport failures are retried up to ``retries`` times per request; the
    client ledger counts a request's images exactly once, on success.
    """

    def __init__(
        self,
        endpoint: str,
        timeout: float = 30.0,
        max_batch: int = 256,
        retries: int = 2,
    ):
        if max_batch < 1:
            raise ValueError(f"max_batch must be >= 1, got {max_batch}")
        self.endpoint = endpoint.rstrip("/")
        self.timeout = float(timeout)
        self.max_batch = int(max_batch)
        self.retries = int(retries)
        self.ledger = QueryLedger()
        self._session = requests.Session()
        self._dim: int | None = None

    @property
    def dim(self) -> int | None:
        """Embedding dimension, known after the first successful call."""
        return self._dim

    def embed_batch(self, images) -> list[Embedding]:
        encoded = [self._encode_image(img) for img in _iter_images(images)]
        if not encoded:
            raise ValueError("image batch must be non-empty")
        out: list[Embedding] = []
        for start in range(0, len(encoded), self.max_batch):
            chunk = encoded[start : start + self.max_batch]
            out.extend(self._post_chunk(chunk))
        return out

    def remote_ledger(self) -> int:
        """Server-side images_sent via GET /ledger."""
        try:
            resp = self._session.get(self.endpoint + "/ledger", timeout=self.timeout)
        except requests.RequestException as exc:
            raise OracleTransportError(f"ledger request failed: {exc}") from exc
        if resp.status_code != 200:
            raise OracleProtocolError(f"ledger endpoint returned HTTP {resp.status_code}")
        return int(resp.json()["images_sent"])

    @staticmethod
    def _encode_image(arr: np.ndarray) -> str:
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("image pixels must lie in [0, 1]; clamp before embedding")
        q = np.round(arr * 255.0).astype(np.uint8)
        if arr.ndim == 2:
            payload = encode_pgm(q)
        else:
            from PIL import Image

            buf = io.BytesIO()
            Image.fromarray(q, mode="RGB").save(buf, format="PNG")
            payload = buf.getvalue()
        return base64.b64encode(payload).decode("ascii")

    def _post_chunk(self, chunk: list[str]) -> list[Embedding]:
        body = {"images": chunk}
        last_exc: Exception | None = None
        for _ in range(self.retries + 1):
            try:
                resp = self._session.post(
                    self.endpoint + "/embed", json=body, timeout=self.timeout
                )
            except requests.RequestException as exc:
                last_exc = exc
                continue
            return self._parse_response(resp, len(chunk))
        raise OracleTransportError(f"embed request failed after retries: {last_exc}")

    def _parse_response(self, resp, n_images: int) -> list[Embedding]:
        if resp.status_code != 200:
            detail = ""
            try:
                detail = resp.json().get("error", "")
            except Exception:
                pass
            raise OracleProtocolError(f"embed endpoint returned HTTP {resp.status_code}: {detail}")
        try:
            payload = resp.json()
            dim = int(payload["dim"])
            rows = payload["embeddings"]
        except (ValueError, KeyError, TypeError) as exc:
            raise OracleProtocolError(f"malformed embed response: {exc}") from exc
        if len(rows) != n_images:
            raise OracleProtocolError(
                f"embed response has {len(rows)} vectors for {n_images} images"
            )
        if self._dim is not None and dim != self._dim:
            raise OracleProtocolError(
                f"embedding dimension drifted from {self._dim} to {dim} between calls"
            )
        try:
            vectors = [Embedding(np.asarray(r, dtype=np.float64)) for r in rows]
        except ValueError as exc:
            raise OracleProtocolError(f"invalid embedding from remote peer: {exc}") from exc
        if any(v.dim != dim for v in vectors):
            raise OracleProtocolError("embedding rows disagree with declared dim")
        self._dim = dim
        self.ledger.count(n_images)
        return vectors


def _iter_images(images):
    if isinstance(images, np.ndarray) and images.ndim in (3, 4):
        return [np.asarray(a, dtype=np.float64) for a in images]
    return [
        img.pixels if isinstance(img, GrayCanvas) else np.asarray(img, dtype=np.float64)
        for img in images
    ]


def make_projection_oracle(seed, dim, input_size, blur_sigma=0.0) -> ProjectionOracle:
    return ProjectionOracle(seed, dim, input_size, blur_sigma)


def make_luma_projection_oracle(
    seed, dim, input_size, blur_sigma=0.0, channel_weights=LUMA_WEIGHTS
) -> LumaProjectionOracle:
    return LumaProjectionOracle(seed, dim, input_size, blur_sigma, channel_weights)


def make_remote_oracle(endpoint, timeout=30.0, max_batch=256, retries=2) -> RemoteOracle:
    return RemoteOracle(endpoint, timeout=timeout, max_batch=max_batch, retries=retries)


def make_oracle(spec: OracleSpec, **remote_options):
    """Instantiate the oracle a spec describes."""
    if spec.kind == "projection":
        return ProjectionOracle(spec.seed, spec.dim, spec.input_size, spec.blur_sigma)
    if spec.kind == "luma_projection":
        return LumaProjectionOracle(
            spec.seed, spec.dim, spec.input_size, spec.blur_sigma, spec.channel_weights
        )
    return RemoteOracle(spec.endpoint, **remote_options)


def embed_batch(oracle, images) -> list[Embedding]:
    """Function form of ``oracle.embed_batch(images)``."""
    return oracle.embed_batch(images)


EMB_MAGIC = b"EMB1"


def write_embedding(path, embedding: Embedding) -> None:
    """Write the .emb format: magic "EMB1", u32 dim, little-endian f32 values."""
    values = embedding.values.astype("<f4")
    with open(path, "wb") as fh:
        fh.write(EMB_MAGIC)
        fh.write(struct.pack("<I", values.shape[0]))
        fh.write(values.tobytes())


def read_embedding(path) -> Embedding:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != EMB_MAGIC:
        raise ValueError(f"{path!r} is not an EMB1 embedding file")
    if len(data) < 8:
        raise ValueError(f"{path!r} is truncated")
    (dim,) = struct.unpack("<I", data[4:8])
    values = np.frombuffer(data[8:], dtype="<f4")
    if values.shape[0] != dim:
        raise ValueError(f"{path!r} declares dim {dim} but holds {values.shape[0]} values")
    return Embedding(values.astype(np.float64))
