"""HTTP embedding service wrapping a synthetic oracle.

Closes the black-box loop end to end: the attacker process sees only the wire
protocol (POST /embed, GET /ledger), never the oracle's seed or projection
matrix. Bad batches (undecodable bytes, wrong size, over the batch cap) are
rejected with HTTP 400 before any image is embedded, so the ledger reflects
exactly the images in successful responses.

Intended for tests and demos; no auth, no TLS, no rate limiting.
"""

from __future__ import annotations

import base64
import binascii
import io
import json
import threading
import time
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from .canvas import decode_pgm
from .oracle import SYNTHETIC_KINDS, OracleSpec, make_oracle

__all__ = ["ServerConfig", "OracleServer", "serve"]


@dataclass(frozen=True)
class ServerConfig:
    """Bind address, wrapped oracle spec, batch cap, optional artificial latency."""

    host: str = "127.0.0.1"
    port: int = 0
    oracle_spec: OracleSpec = None
    max_batch: int = 256
    latency_ms: float | None = None

    def __post_init__(self):
        if self.oracle_spec is None or self.oracle_spec.kind not in SYNTHETIC_KINDS:
            raise ValueError("mock server requires a synthetic oracle spec")
        if self.max_batch < 1:
            raise ValueError(f"max_batch must be >= 1, got {self.max_batch}")
        if self.latency_ms is not None and self.latency_ms < 0:
            raise ValueError("latency_ms must be >= 0")


def _decode_image(b64: str) -> np.ndarray:
    """base64 PGM/PNG bytes -> float64 array in [0, 1], (H, W) or (H, W, 3)."""
    try:
        raw = base64.b64decode(b64, validate=True)
    except (binascii.Error, TypeError) as exc:
        raise ValueError(f"invalid base64 image payload: {exc}") from exc
    if raw[:2] == b"P5":
        q = decode_pgm(raw)
    else:
        from PIL import Image, UnidentifiedImageError

        try:
            img = Image.open(io.BytesIO(raw))
            img.load()
        except (UnidentifiedImageError, OSError) as exc:
            raise ValueError(f"undecodable image bytes: {exc}") from exc
        if img.mode == "L":
            q = np.asarray(img, dtype=np.uint8)
        elif img.mode == "RGB":
            q = np.asarray(img, dtype=np.uint8)
        else:
            raise ValueError(f"unsupported image mode {img.mode!r} (expected L or RGB)")
    return q.astype(np.float64) / 255.0


class _Handler(BaseHTTPRequestHandler):
    server_version = "blobvert-mockserver/0.1"
    protocol_version = "HTTP/1.1"

    def log_message(self, format, *args):  # keep test output clean
        pass

    def _send_json(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        if self.path == "/ledger":
            self._send_json(200, {"images_sent": self.server.oracle.ledger.images_sent})
        else:
            self._send_json(404, {"error": f"no such endpoint: {self.path}"})

    def do_POST(self):
        if self.path != "/embed":
            self._send_json(404, {"error": f"no such endpoint: {self.path}"})
            return
        cfg = self.server.config
        if cfg.latency_ms:
            time.sleep(cfg.latency_ms / 1000.0)
        try:
            length = int(self.headers.get("Content-Length", 0))
            payload = json.loads(self.rfile.read(length))
            images = payload["images"]
            if not isinstance(images, list) or not images:
                raise ValueError("request must carry a non-empty 'images' list")
        except (ValueError, KeyError, TypeError) as exc:
            self._send_json(400, {"error": f"malformed request: {exc}"})
            return
        if len(images) > cfg.max_batch:
            self._send_json(
                400, {"error": f"batch of {len(images)} exceeds max batch {cfg.max_batch}"}
            )
            return
        # Decode and validate the whole batch before embedding anything, so a
        # rejected request never moves the ledger.
        try:
            arrays = [_decode_image(b64) for b64 in images]
            embeddings = self.server.oracle.embed_batch(arrays)
        except ValueError as exc:
            self._send_json(400, {"error": str(exc)})
            return
        self._send_json(
            200,
            {"dim": embeddings[0].dim, "embeddings": [e.values.tolist() for e in embeddings]},
        )


class OracleServer:
    """Running mock service; use as a context manager or call shutdown()."""

    def __init__(self, config: ServerConfig):
        self.config = config
        self.oracle = make_oracle(config.oracle_spec)
        self._httpd = ThreadingHTTPServer((config.host, config.port), _Handler)
        self._httpd.oracle = self.oracle
        self._httpd.config = config
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()

    @property
    def address(self) -> tuple[str, int]:
        return self._httpd.server_address[:2]

    @property
    def endpoint(self) -> str:
        host, port = self.address
        return f"http://{host}:{port}"

    def shutdown(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        self._thread.join(timeout=5.0)

    def __enter__(self) -> "OracleServer":
        return self

    def __exit__(self, *exc_info) -> None:
        self.shutdown()


def serve(config: ServerConfig) -> OracleServer:
    """Start serving the wire protocol; returns the running handle."""
    return OracleServer(config)
