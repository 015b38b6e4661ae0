"""blobvert: black-box embedding inversion with additive 2D Gaussian blobs.

Reconstructs a grayscale image from a target embedding by zero-order descent
in blob space, querying the embedding model only through its input/output
interface, with exact query accounting and an independent-critic evaluation
harness.
"""

from .blobs import (
    DictionaryGrid,
    GaussianBlob,
    SamplerConfig,
    build_dictionary,
    default_dictionary_grid,
    mirror_field,
    render,
    render_symmetric,
    sample_batch,
)
from .canvas import (
    GrayCanvas,
    add_field,
    clamp_unit,
    from_array,
    load_image,
    new_canvas,
    save_image,
    scale_field,
)
from .evaluation import EvalReport, GrayToleranceReport, evaluate_set, gray_tolerance, to_luma
from .mockserver import OracleServer, ServerConfig, serve
from .objective import LossParams, cosine_similarity, loss, select_best
from .oracle import (
    Embedding,
    OracleError,
    OracleProtocolError,
    OracleSpec,
    OracleTransportError,
    QueryLedger,
    embed_batch,
    make_luma_projection_oracle,
    make_oracle,
    make_projection_oracle,
    make_remote_oracle,
    read_embedding,
    write_embedding,
)
from .recovery import (
    IterationRecord,
    RecoveryConfig,
    RunTrace,
    init_dictionary_search,
    init_face,
    load_trace_records,
    recover,
    save_trace,
)

__version__ = "0.1.0"
