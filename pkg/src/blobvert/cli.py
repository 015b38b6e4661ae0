"""Operator surface: recover, embed, eval, gray-tolerance, build-dict, serve-oracle, curve.

Runs are configured by a TOML file with one section per concern ([run],
[loss], [sampler], [dictionary], [oracle]; [attacked]/[critic] for eval) and
overridden by flags. Every command echoes its fully-resolved configuration,
defaults and seeds included, into the output directory, so any run can be
replayed from its summary alone. BLOBVERT_SEED overrides the run seed for CI.

Exit codes: 0 success, 2 bad usage/config/missing file, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import signal
import sys

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .blobs import DictionaryGrid, SamplerConfig, build_dictionary, default_dictionary_grid
from .canvas import GrayCanvas, load_image, save_image
from .evaluation import evaluate_set, gray_tolerance
from .mockserver import ServerConfig, serve
from .objective import DEFAULT_LAMBDA, LossParams
from .oracle import (
    OracleError,
    OracleSpec,
    make_oracle,
    read_embedding,
    write_embedding,
)
from .recovery import RecoveryConfig, load_trace_records, recover, save_trace

SEED_ENV = "BLOBVERT_SEED"


class CLIError(Exception):
    def __init__(self, message: str, code: int = 2):
        super().__init__(message)
        self.code = code


def _load_toml(path: str) -> dict:
    if not os.path.exists(path):
        raise CLIError(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise CLIError(f"cannot parse config file {path}: {exc}")


def _require_file(path: str, what: str) -> str:
    if not os.path.exists(path):
        raise CLIError(f"{what} not found: {path}")
    return path


def _load_image_any(path: str) -> np.ndarray:
    """Grayscale file -> (H, W); color file -> (H, W, 3); values in [0, 1]."""
    _require_file(path, "image file")
    with open(path, "rb") as fh:
        head = fh.read(2)
    if head == b"P5":
        return load_image(path).pixels
    from PIL import Image

    img = Image.open(path)
    if img.mode == "L":
        return np.asarray(img, dtype=np.float64) / 255.0
    return np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0


def _oracle_spec_from(table: dict, default_input_size=None) -> OracleSpec:
    table = dict(table)
    if default_input_size is not None and "input_size" not in table and table.get("kind") != "remote":
        table["input_size"] = list(default_input_size)
    try:
        return OracleSpec.from_mapping(table)
    except (ValueError, TypeError) as exc:
        raise CLIError(f"invalid oracle spec: {exc}")


DEFAULT_ORACLE_TABLE = {"kind": "projection", "seed": 0, "dim": 128, "blur_sigma": 3.0}


def _resolve_run(config: dict, args) -> tuple[RecoveryConfig, OracleSpec, dict]:
    """Merge config file, env, and flags into a run; returns the echo dict too."""
    run = dict(config.get("run", {}))

    def pick(flag_value, key, default):
        if flag_value is not None:
            return flag_value
        return run.get(key, default)

    canvas_size = tuple(int(v) for v in run.get("canvas_size", (112, 112)))
    budget = pick(args.budget, "query_budget", None)
    if budget is None:
        raise CLIError("query budget missing: set [run].query_budget or pass --budget")
    mode = pick(args.mode, "mode", "symmetric")
    if mode not in ("symmetric", "asymmetric"):
        raise CLIError(f"mode must be symmetric or asymmetric, got {mode!r}")
    seed = pick(args.seed, "seed", 0)
    env_seed = os.environ.get(SEED_ENV)
    if env_seed is not None:
        seed = int(env_seed)
    init_mode = pick(getattr(args, "init", None), "init_mode", "dictionary")
    init_face = pick(getattr(args, "init_face", None), "init_face", None)

    loss_table = dict(config.get("loss", {}))
    lam = float(loss_table.get("lambda", DEFAULT_LAMBDA))

    sampler_table = dict(config.get("sampler", {}))
    allowed = {"x0_range", "y0_range", "sigma_range", "amplitude_range"}
    unknown = set(sampler_table) - allowed
    if unknown:
        raise CLIError(f"unknown [sampler] keys: {sorted(unknown)} (mode sets symmetry)")
    sampler_kwargs = {k: tuple(float(x) for x in v) for k, v in sampler_table.items()}
    sampler = SamplerConfig.for_canvas(
        *canvas_size, symmetric=(mode == "symmetric"), seed=int(seed), **sampler_kwargs
    )

    grid = None
    if "dictionary" in config:
        try:
            grid = DictionaryGrid(**config["dictionary"])
        except (TypeError, ValueError) as exc:
            raise CLIError(f"invalid [dictionary] section: {exc}")

    try:
        rc = RecoveryConfig(
            query_budget=int(budget),
            batch_size=int(pick(args.batch_size, "batch_size", 64)),
            canvas_size=canvas_size,
            loss_params=LossParams(lam),
            sampler=sampler,
            fade_factor=float(pick(args.fade_factor, "fade_factor", 0.99)),
            init_mode=init_mode,
            init_face=init_face,
            resize_init_face=bool(run.get("resize_init_face", False)),
            dictionary_grid=grid,
            cosine_only=run.get("cosine_only"),
            include_identity_candidate=bool(run.get("include_identity_candidate", True)),
            seed=int(seed),
        )
    except ValueError as exc:
        raise CLIError(f"invalid run config: {exc}")

    oracle_table = config.get("oracle", DEFAULT_ORACLE_TABLE)
    spec = _oracle_spec_from(oracle_table, default_input_size=canvas_size)

    g = rc.resolved_grid()
    echo = {
        "run": {
            "seed": rc.seed,
            "canvas_size": list(rc.canvas_size),
            "query_budget": rc.query_budget,
            "batch_size": rc.batch_size,
            "mode": mode,
            "fade_factor": rc.fade_factor,
            "init_mode": rc.init_mode,
            "init_face": rc.init_face,
            "resize_init_face": rc.resize_init_face,
            "include_identity_candidate": rc.include_identity_candidate,
            "cosine_only": rc.resolved_cosine_only(),
        },
        "loss": {"lambda": rc.loss_params.lam},
        "sampler": {
            "x0_range": list(sampler.x0_range),
            "y0_range": list(sampler.y0_range),
            "sigma_range": list(sampler.sigma_range),
            "amplitude_range": list(sampler.amplitude_range),
            "symmetric": sampler.symmetric,
            "seed": sampler.seed,
        },
        "dictionary": {
            "x0_values": list(g.x0_values),
            "y0_values": list(g.y0_values),
            "sigma1_values": list(g.sigma1_values),
            "sigma2_values": list(g.sigma2_values),
            "amplitude": g.amplitude,
            "size": len(g),
        }
        if rc.init_mode == "dictionary"
        else None,
        "oracle": spec.to_mapping(),
    }
    return rc, spec, echo


def cmd_recover(args) -> int:
    config = _load_toml(args.config) if args.config else {}
    rc, spec, echo = _resolve_run(config, args)
    _require_file(args.target, "target embedding file")
    try:
        target = read_embedding(args.target)
    except ValueError as exc:
        raise CLIError(str(exc))

    oracle = make_oracle(spec)
    os.makedirs(args.out, exist_ok=True)
    try:
        reconstruction, trace = recover(oracle, target, rc)
    except ValueError as exc:
        raise CLIError(f"recovery failed: {exc}")

    recon_path = os.path.join(args.out, "recon.pgm")
    trace_path = os.path.join(args.out, "trace.jsonl")
    summary_path = os.path.join(args.out, "summary.json")
    save_image(GrayCanvas(np.clip(reconstruction.pixels, 0.0, 1.0)), recon_path)
    save_trace(trace, trace_path)
    summary = {
        "argv": sys.argv[1:],
        "config": echo,
        "target": args.target,
        "result": trace.summary(),
        "outputs": {"reconstruction": recon_path, "trace": trace_path},
    }
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    if trace.error:
        print(f"recover: oracle failed mid-run: {trace.error}", file=sys.stderr)
        print(f"partial outputs written to {args.out}", file=sys.stderr)
        return 1
    print(
        f"recover: {trace.total_queries} queries, "
        f"final similarity {trace.final_similarity}, outputs in {args.out}"
    )
    return 0


def cmd_embed(args) -> int:
    config = _load_toml(args.config) if args.config else {}
    canvas_hint = None
    if args.images:
        first = _load_image_any(args.images[0])
        canvas_hint = (first.shape[1], first.shape[0])
    spec = _oracle_spec_from(config.get("oracle", DEFAULT_ORACLE_TABLE), canvas_hint)
    oracle = make_oracle(spec)
    if not args.images:
        raise CLIError("no input images given")
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
    written = []
    for path in args.images:
        arr = _load_image_any(path)
        try:
            emb = oracle.embed_batch([arr])[0]
        except (ValueError, OracleError) as exc:
            raise CLIError(f"embedding {path} failed: {exc}", code=1)
        stem = os.path.splitext(os.path.basename(path))[0]
        out_dir = args.out_dir or os.path.dirname(path) or "."
        out_path = os.path.join(out_dir, stem + ".emb")
        write_embedding(out_path, emb)
        written.append(out_path)
    print("\n".join(written))
    return 0


def cmd_eval(args) -> int:
    config = _load_toml(args.config)
    for section in ("attacked", "critic"):
        if section not in config:
            raise CLIError(f"eval config must define [{section}] oracle section")
    _require_file(args.pairs, "pairs file")
    pairs = []
    with open(args.pairs, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 2:
                raise CLIError(f"pairs file line must be 'original,reconstruction': {line!r}")
            pairs.append((_load_image_any(parts[0]), _load_image_any(parts[1])))
    if not pairs:
        raise CLIError(f"pairs file {args.pairs} lists no image pairs")
    size_hint = (pairs[0][0].shape[1], pairs[0][0].shape[0])
    attacked = make_oracle(_oracle_spec_from(config["attacked"], size_hint))
    critic = make_oracle(_oracle_spec_from(config["critic"], size_hint))
    try:
        report = evaluate_set(attacked, critic, pairs, bins=args.bins)
    except (ValueError, OracleError) as exc:
        raise CLIError(f"evaluation failed: {exc}", code=1)
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "report.csv")
    summary_path = os.path.join(args.out, "summary.json")
    report.write_csv(csv_path)
    report.write_summary(summary_path)
    agg = report.aggregates()
    print(
        f"eval: {report.n_items} pairs, attacked mean {agg['attacked']['mean']:.4f}, "
        f"critic mean {agg['critic']['mean']:.4f}"
    )
    return 0


def cmd_gray_tolerance(args) -> int:
    config = _load_toml(args.config) if args.config else {}
    table = config.get("oracle", {"kind": "luma_projection", "seed": 0, "dim": 128})
    if not args.images:
        raise CLIError("no input images given")
    images = [_load_image_any(p) for p in args.images]
    hint = (images[0].shape[1], images[0].shape[0])
    spec = _oracle_spec_from(table, hint)
    oracle = make_oracle(spec)
    try:
        report = gray_tolerance(oracle, images, bins=args.bins)
    except (ValueError, OracleError) as exc:
        raise CLIError(f"gray-tolerance run failed: {exc}", code=1)
    os.makedirs(args.out, exist_ok=True)
    report.write_csv(os.path.join(args.out, "tolerance.csv"))
    report.write_summary(os.path.join(args.out, "summary.json"))
    agg = report.aggregates()
    print(f"gray-tolerance: {agg['n_items']} images, mean {agg['mean']:.6f}, min {agg['min']:.6f}")
    return 0


def cmd_build_dict(args) -> int:
    if args.config:
        config = _load_toml(args.config)
        if "dictionary" in config:
            try:
                grid = DictionaryGrid(**config["dictionary"])
            except (TypeError, ValueError) as exc:
                raise CLIError(f"invalid [dictionary] section: {exc}")
        else:
            run = config.get("run", {})
            w, h = run.get("canvas_size", (112, 112))
            grid = default_dictionary_grid(int(w), int(h))
    else:
        grid = default_dictionary_grid()
    blobs = build_dictionary(grid)
    payload = {
        "size": len(blobs),
        "amplitude": grid.amplitude,
        "entries": [b.as_list() for b in blobs],
    }
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
        fh.write("\n")
    print(f"build-dict: {len(blobs)} blobs written to {args.out}")
    return 0


def cmd_serve_oracle(args) -> int:
    config = _load_toml(args.spec)
    if "oracle" not in config:
        raise CLIError(f"spec file {args.spec} must define an [oracle] section")
    spec = _oracle_spec_from(config["oracle"])
    host, _, port = args.bind.rpartition(":")
    if not host or not port.isdigit():
        raise CLIError(f"--bind must be addr:port, got {args.bind!r}")
    try:
        server_config = ServerConfig(
            host=host,
            port=int(port),
            oracle_spec=spec,
            max_batch=args.max_batch,
            latency_ms=args.latency_ms,
        )
        server = serve(server_config)
    except (ValueError, OSError) as exc:
        raise CLIError(f"cannot start server: {exc}", code=1)
    stop = {"flag": False}

    def _on_signal(signum, frame):
        stop["flag"] = True

    signal.signal(signal.SIGINT, _on_signal)
    signal.signal(signal.SIGTERM, _on_signal)
    print(f"serve-oracle: listening on {server.endpoint} ({spec.kind}, dim {spec.dim})")
    try:
        while not stop["flag"]:
            signal.pause()
    finally:
        server.shutdown()
        print("serve-oracle: shut down")
    return 0


def cmd_curve(args) -> int:
    if not args.traces:
        raise CLIError("no trace files given")
    all_records = []
    for path in args.traces:
        _require_file(path, "trace file")
        records = load_trace_records(path)
        if not records:
            raise CLIError(f"trace file {path} holds no records")
        all_records.append(records)
    lengths = [len(r) for r in all_records]
    rows = min(lengths)
    queries = np.array([[r[i].queries_used for r in all_records] for i in range(rows)])
    cosines = np.array([[r[i].cosine for r in all_records] for i in range(rows)])
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("iteration,mean_queries,mean_cos\n")
        for i in range(rows):
            fh.write(f"{i},{float(queries[i].mean())!r},{float(cosines[i].mean())!r}\n")
    meta = {
        "n_traces": len(all_records),
        "rows": rows,
        "trace_lengths": lengths,
        "truncated_to_shortest": len(set(lengths)) > 1,
        "sources": list(args.traces),
    }
    meta_path = os.path.splitext(args.out)[0] + ".meta.json"
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
    print(f"curve: {rows} rows from {len(all_records)} traces -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blobvert",
        description="Black-box embedding inversion with additive Gaussian blobs.",
    )
    parser.add_argument("--version", action="version", version=f"blobvert {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("recover", help="run a recovery against a target embedding")
    p.add_argument("--config", help="TOML run config")
    p.add_argument("--target", required=True, help="target .emb file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--budget", type=int, help="query budget (overrides config)")
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--mode", choices=["symmetric", "asymmetric"])
    p.add_argument("--seed", type=int)
    p.add_argument("--fade-factor", type=float, dest="fade_factor")
    p.add_argument("--init", choices=["dictionary", "face_image"])
    p.add_argument("--init-face", dest="init_face")
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("embed", help="embed image files, writing .emb outputs")
    p.add_argument("--config", help="TOML file with an [oracle] section")
    p.add_argument("--out-dir", dest="out_dir", help="directory for .emb files")
    p.add_argument("images", nargs="*", help="image files (PGM/PNG)")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("eval", help="score (original, reconstruction) pairs under two oracles")
    p.add_argument("--config", required=True, help="TOML with [attacked] and [critic] sections")
    p.add_argument("--pairs", required=True, help="CSV of original,reconstruction paths")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--bins", type=int, default=20, help="histogram bins over [-1, 1]")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gray-tolerance", help="RGB-vs-grayscale similarity distribution")
    p.add_argument("--config", help="TOML file with an [oracle] section (3-channel capable)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("images", nargs="*", help="color image files")
    p.set_defaults(func=cmd_gray_tolerance)

    p = sub.add_parser("build-dict", help="materialize the initialization dictionary")
    p.add_argument("--config", help="TOML run config (uses [dictionary] or canvas size)")
    p.add_argument("--out", required=True, help="output JSON path")
    p.set_defaults(func=cmd_build_dict)

    p = sub.add_parser("serve-oracle", help="serve a synthetic oracle over HTTP")
    p.add_argument("--spec", required=True, help="TOML file with an [oracle] section")
    p.add_argument("--bind", default="127.0.0.1:8080", help="addr:port")
    p.add_argument("--max-batch", type=int, default=256, dest="max_batch")
    p.add_argument("--latency-ms", type=float, default=None, dest="latency_ms")
    p.set_defaults(func=cmd_serve_oracle)

    p = sub.add_parser("curve", help="aggregate traces into mean similarity vs queries")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("traces", nargs="*", help="trace.jsonl files")
    p.set_defaults(func=cmd_curve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CLIError as exc:
        print(f"blobvert {args.command}: {exc}", file=sys.stderr)
        return exc.code
    except OracleError as exc:
        print(f"blobvert {args.command}: oracle failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
