"""The same attack, but the oracle lives behind HTTP.

Spins up the bundled mock server on an ephemeral port, then runs recovery
through the remote client: images go out as base64 PGM, embeddings come back
as JSON. The point is that nothing in the loop knows or cares which side of
the wire the oracle is on, and the server's own query ledger agrees with the
client's count at the end.
"""

import numpy as np

from blobvert import (
    GaussianBlob,
    RecoveryConfig,
    make_remote_oracle,
    recover,
    render_symmetric,
)
from blobvert.mockserver import ServerConfig, serve
from blobvert.oracle import OracleSpec

W = H = 64


def main():
    spec = OracleSpec(kind="projection", seed=505, dim=96, input_size=(W, H), blur_sigma=1.2)

    secret = np.clip(
        render_symmetric(GaussianBlob(24, 28, 10, 16, 0.9), W, H).pixels
        + render_symmetric(GaussianBlob(32, 48, 12, 4, -0.4), W, H).pixels,
        0.0, 1.0,
    )

    with serve(ServerConfig(port=0, oracle_spec=spec)) as server:
        print(f"oracle serving at {server.endpoint}")
        oracle = make_remote_oracle(server.endpoint, max_batch=128)

        target = oracle.embed_batch([secret])[0]
        print(f"fetched target embedding over HTTP: dim {target.dim}")

        cfg = RecoveryConfig(query_budget=6000, batch_size=32, canvas_size=(W, H), seed=3)
        recon, trace = recover(oracle, target, cfg)

        print(f"final cosine {trace.final_similarity:.4f} "
              f"after {trace.total_queries} queries")
        print(f"client-side ledger:  {oracle.ledger.images_sent} images")
        print(f"server-side ledger:  {oracle.remote_ledger()} images")


if __name__ == "__main__":
    main()
