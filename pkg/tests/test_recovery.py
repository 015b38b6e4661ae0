import numpy as np
import pytest

from blobvert import (
    DictionaryGrid,
    GaussianBlob,
    GrayCanvas,
    RecoveryConfig,
    SamplerConfig,
    build_dictionary,
    cosine_similarity,
    from_array,
    init_dictionary_search,
    init_face,
    load_trace_records,
    loss,
    make_projection_oracle,
    recover,
    render_symmetric,
    sample_batch,
    save_image,
    save_trace,
)
from blobvert.oracle import Embedding, OracleTransportError, QueryLedger
from blobvert.recovery import DICT_CHUNK, IterationRecord, _dictionary_search

from conftest import RecordingOracle, race_image

SMALL_GRID = DictionaryGrid(
    x0_values=(20.0, 43.0), y0_values=(10.0, 31.0, 52.0),
    sigma1_values=(5.0, 12.0), sigma2_values=(5.0, 14.0),
)


def small_oracle(seed=1717, dim=64, size=64, blur=1.0):
    return make_projection_oracle(seed=seed, dim=dim, input_size=(size, size), blur_sigma=blur)


def test_single_entry_dictionary():
    oracle = small_oracle()
    target = oracle.embed_batch([race_image()])[0]
    blob = GaussianBlob(30, 30, 8, 8, 0.5)
    canvas, used = init_dictionary_search(oracle, target, [blob], (64, 64))
    assert used == 1
    assert np.array_equal(canvas.pixels, render_symmetric(blob, 64, 64).pixels)


def test_dictionary_search_finds_planted_entry():
    oracle = small_oracle()
    dictionary = build_dictionary(SMALL_GRID)
    # x0 20 and 43 mirror onto each other at width 64, so every entry has a
    # bit-identical twin 12 ranks away; pick the earlier twin so argmax
    # first-wins lands on it
    k = 5
    planted = np.clip(render_symmetric(dictionary[k], 64, 64).pixels, 0, 1)
    target = oracle.embed_batch([planted])[0]
    best, best_cos, g0, used = _dictionary_search(oracle, target, dictionary, (64, 64))
    assert best == k
    assert best_cos == 1.0
    assert used == len(dictionary)


def test_dictionary_tie_breaks_to_first():
    oracle = small_oracle()
    a = GaussianBlob(20, 20, 6, 6, 0.5)
    b = GaussianBlob(40, 40, 10, 10, 0.5)
    target = oracle.embed_batch([np.clip(render_symmetric(a, 64, 64).pixels, 0, 1)])[0]
    best, _, _, _ = _dictionary_search(oracle, target, [a, a, b], (64, 64))
    assert best == 0


def test_dictionary_search_chunks_large_dictionaries():
    oracle = make_projection_oracle(seed=5, dim=8, input_size=(16, 16), blur_sigma=0.5)
    grid = DictionaryGrid(
        x0_values=tuple(np.linspace(2, 14, 5)),
        y0_values=tuple(np.linspace(2, 14, 10)),
        sigma1_values=tuple(np.linspace(1, 6, 4)),
        sigma2_values=tuple(np.linspace(1, 6, 3)),
    )
    dictionary = build_dictionary(grid)
    assert len(dictionary) == 600 > DICT_CHUNK
    target = oracle.embed_batch([np.clip(render_symmetric(dictionary[3], 16, 16).pixels, 0, 1)])[0]
    before = oracle.ledger.images_sent
    recording = RecordingOracle(oracle)
    best, _, _, used = _dictionary_search(recording, target, dictionary, (16, 16))
    assert best == 3
    assert used == 600
    assert oracle.ledger.images_sent - before == 600
    assert [len(c) for c in recording.calls] == [256, 256, 88]


def test_empty_dictionary_rejected():
    oracle = small_oracle()
    target = Embedding(np.ones(64))
    with pytest.raises(ValueError):
        init_dictionary_search(oracle, target, [], (64, 64))


def test_init_face_roundtrip(tmp_path):
    rng = np.random.default_rng(60)
    img = rng.integers(0, 256, size=(64, 64)).astype(np.float64) / 255.0
    p = tmp_path / "face.pgm"
    save_image(from_array(img), p)
    got = init_face(p, (64, 64))
    assert np.array_equal(got.pixels, img)


def test_init_face_accepts_all_black(tmp_path):
    p = tmp_path / "black.pgm"
    save_image(from_array(np.zeros((8, 8))), p)
    got = init_face(p, (8, 8))
    assert np.all(got.pixels == 0.0)


def test_init_face_wrong_size(tmp_path):
    p = tmp_path / "small.pgm"
    save_image(from_array(np.full((8, 8), 0.5)), p)
    with pytest.raises(ValueError):
        init_face(p, (16, 16))
    resized = init_face(p, (16, 16), resize=True)
    assert resized.pixels.shape == (16, 16)


def test_budget_zero_face_init_returns_init_image(tmp_path):
    img = np.full((16, 16), 0.25)
    p = tmp_path / "init.pgm"
    save_image(from_array(img), p)
    oracle = make_projection_oracle(seed=0, dim=8, input_size=(16, 16))
    cfg = RecoveryConfig(query_budget=0, batch_size=4, canvas_size=(16, 16),
                         init_mode="face_image", init_face=str(p))
    recon, trace = recover(oracle, Embedding(np.ones(8)), cfg)
    assert trace.records == []
    assert trace.total_queries == 0
    assert trace.final_similarity is None
    assert np.array_equal(recon.pixels, init_face(p, (16, 16)).pixels)
    assert oracle.ledger.images_sent == 0


class RiggedOracle:
    """Returns scripted embeddings regardless of the images."""

    def __init__(self, plan, input_size):
        self.plan = [ [Embedding(np.asarray(v, dtype=np.float64)) for v in batch]
                      for batch in plan ]
        self.input_size = input_size
        self.ledger = QueryLedger()

    def embed_batch(self, images):
        batch = self.plan.pop(0)
        self.ledger.count(len(batch))
        return batch


def test_rigged_batch_accepts_lowest_loss_candidate(tmp_path):
    p = tmp_path / "init.pgm"
    save_image(from_array(np.full((16, 16), 0.5)), p)
    target = Embedding(np.array([1.0, 0.0]))
    plan = [[[0.0, 1.0], [0.7, 0.7], [1.0, 0.0]]]  # index 2 scores loss -1
    oracle = RiggedOracle(plan, (16, 16))
    cfg = RecoveryConfig(
        query_budget=3, batch_size=3, canvas_size=(16, 16),
        init_mode="face_image", init_face=str(p),
        include_identity_candidate=False, cosine_only=False, seed=13,
    )
    recon, trace = recover(oracle, target, cfg)
    assert len(trace.records) == 1
    rec = trace.records[0]
    assert rec.best_loss == loss(target, Embedding(np.array([1.0, 0.0])))
    assert rec.cosine == 1.0
    # the accepted blob is the third sampled one for this seed
    expected = sample_batch(cfg.resolved_sampler(), np.random.default_rng(13), 3)[2]
    assert rec.blob.as_list() == expected.as_list()


def test_identity_candidate_keeps_best_loss_non_increasing(tmp_path):
    p = tmp_path / "init.pgm"
    save_image(from_array(np.full((32, 32), 0.5)), p)
    oracle = make_projection_oracle(seed=3, dim=32, input_size=(32, 32), blur_sigma=1.0)
    target = oracle.embed_batch([race_image(32, 32)])[0]
    cfg = RecoveryConfig(
        query_budget=240, batch_size=8, canvas_size=(32, 32),
        init_mode="face_image", init_face=str(p),
        fade_factor=1.0, cosine_only=False, seed=2,
    )
    recording = RecordingOracle(oracle)
    recon, trace = recover(recording, target, cfg)
    assert len(trace.records) == 30
    losses = [r.best_loss for r in trace.records]
    # exact argmin against every batch peer, identity candidate included
    for rec, call in zip(trace.records, recording.calls):
        batch_losses = [loss(target, e, cfg.loss_params) for e in call]
        assert rec.best_loss == min(batch_losses)
    # with no fade the re-fed state pins the sequence (float jitter only)
    diffs = np.diff(losses)
    assert np.all(diffs <= 1e-12)


def test_fade_geometry_with_zero_amplitude_sampler(tmp_path):
    rng = np.random.default_rng(61)
    img = rng.integers(1, 256, size=(16, 16)).astype(np.float64) / 255.0
    p = tmp_path / "init.pgm"
    save_image(from_array(img), p)
    oracle = make_projection_oracle(seed=0, dim=8, input_size=(16, 16))
    k, batch = 12, 4
    sampler = SamplerConfig.for_canvas(16, 16, amplitude_range=(0.0, 0.0))
    cfg = RecoveryConfig(
        query_budget=k * batch, batch_size=batch, canvas_size=(16, 16),
        init_mode="face_image", init_face=str(p),
        sampler=sampler, fade_factor=0.97, seed=0,
    )
    recon, trace = recover(oracle, Embedding(np.ones(8)), cfg)
    assert len(trace.records) == k
    expected = init_face(p, (16, 16)).pixels
    for _ in range(k):
        expected = expected * 0.97
    assert np.array_equal(recon.pixels, expected)


def test_query_conservation_with_dictionary_init():
    oracle = small_oracle()
    target = oracle.embed_batch([race_image()])[0]
    before = oracle.ledger.images_sent
    cfg = RecoveryConfig(query_budget=1000, batch_size=32, canvas_size=(64, 64),
                         dictionary_grid=SMALL_GRID, seed=4)
    recon, trace = recover(oracle, target, cfg)
    dict_size = len(build_dictionary(SMALL_GRID))
    iters = len(trace.records)
    assert trace.init_queries == dict_size
    assert trace.total_queries == dict_size + iters * 32
    assert oracle.ledger.images_sent - before == trace.total_queries
    assert iters == (1000 - dict_size) // 32


def test_budget_leftover_below_batch_is_unspent():
    oracle = small_oracle()
    target = oracle.embed_batch([race_image()])[0]
    dict_size = len(build_dictionary(SMALL_GRID))
    cfg = RecoveryConfig(query_budget=dict_size + 70, batch_size=32,
                         canvas_size=(64, 64), dictionary_grid=SMALL_GRID, seed=4)
    _, trace = recover(oracle, target, cfg)
    assert len(trace.records) == 2
    assert trace.total_queries == dict_size + 64


def test_budget_below_dictionary_size_rejected():
    oracle = small_oracle()
    target = oracle.embed_batch([race_image()])[0]
    cfg = RecoveryConfig(query_budget=10, batch_size=4, canvas_size=(64, 64),
                         dictionary_grid=SMALL_GRID)
    with pytest.raises(ValueError):
        recover(oracle, target, cfg)


def test_canvas_oracle_size_mismatch_rejected():
    oracle = make_projection_oracle(seed=0, dim=8, input_size=(8, 8))
    cfg = RecoveryConfig(query_budget=100, batch_size=4, canvas_size=(16, 16))
    with pytest.raises(ValueError):
        recover(oracle, Embedding(np.ones(8)), cfg)


def test_trace_queries_strictly_increase_by_batch():
    oracle = small_oracle()
    target = oracle.embed_batch([race_image()])[0]
    cfg = RecoveryConfig(query_budget=800, batch_size=16, canvas_size=(64, 64),
                         dictionary_grid=SMALL_GRID, seed=6)
    _, trace = recover(oracle, target, cfg)
    qs = [r.queries_used for r in trace.records]
    assert qs[0] == trace.init_queries + 16
    assert all(b - a == 16 for a, b in zip(qs, qs[1:]))
    assert [r.iteration for r in trace.records] == list(range(len(qs)))


def test_determinism_byte_identical_outputs(tmp_path):
    oracle_a = small_oracle()
    oracle_b = small_oracle()
    target_a = oracle_a.embed_batch([race_image()])[0]
    target_b = oracle_b.embed_batch([race_image()])[0]
    cfg = RecoveryConfig(query_budget=1500, batch_size=32, canvas_size=(64, 64),
                         dictionary_grid=SMALL_GRID, seed=11)
    out = {}
    for name, oracle, target in (("a", oracle_a, target_a), ("b", oracle_b, target_b)):
        recon, trace = recover(oracle, target, cfg)
        rp = tmp_path / f"recon_{name}.pgm"
        tp = tmp_path / f"trace_{name}.jsonl"
        save_image(GrayCanvas(np.clip(recon.pixels, 0, 1)), rp)
        save_trace(trace, tp)
        out[name] = (rp.read_bytes(), tp.read_bytes())
    assert out["a"][0] == out["b"][0]
    assert out["a"][1] == out["b"][1]


class FlakyOracle:
    """Delegates to a real oracle, then fails transport on call N."""

    def __init__(self, inner, fail_at):
        self.inner = inner
        self.fail_at = fail_at
        self.calls = 0

    def embed_batch(self, images):
        if self.calls == self.fail_at:
            raise OracleTransportError("connection dropped")
        self.calls += 1
        return self.inner.embed_batch(images)

    def __getattr__(self, name):
        return getattr(self.inner, name)


def test_oracle_failure_yields_partial_trace(tmp_path):
    p = tmp_path / "init.pgm"
    save_image(from_array(np.full((32, 32), 0.5)), p)
    oracle = make_projection_oracle(seed=3, dim=16, input_size=(32, 32), blur_sigma=1.0)
    target = oracle.embed_batch([race_image(32, 32)])[0]
    flaky = FlakyOracle(oracle, fail_at=5)
    cfg = RecoveryConfig(query_budget=800, batch_size=8, canvas_size=(32, 32),
                         init_mode="face_image", init_face=str(p), seed=0)
    recon, trace = recover(flaky, target, cfg)
    assert trace.error is not None
    assert "connection dropped" in trace.error
    assert len(trace.records) == 5
    assert trace.total_queries == 5 * 8
    assert recon.pixels.shape == (32, 32)


def test_cosine_only_resolution():
    assert RecoveryConfig(query_budget=1, init_mode="face_image",
                          init_face="x.pgm").resolved_cosine_only() is True
    assert RecoveryConfig(query_budget=1).resolved_cosine_only() is False
    assert RecoveryConfig(query_budget=1, init_mode="face_image", init_face="x.pgm",
                          cosine_only=False).resolved_cosine_only() is False


def test_config_validation():
    with pytest.raises(ValueError):
        RecoveryConfig(query_budget=-1)
    with pytest.raises(ValueError):
        RecoveryConfig(query_budget=10, batch_size=0)
    with pytest.raises(ValueError):
        RecoveryConfig(query_budget=10, fade_factor=0.0)
    with pytest.raises(ValueError):
        RecoveryConfig(query_budget=10, fade_factor=1.5)
    with pytest.raises(ValueError):
        RecoveryConfig(query_budget=10, init_mode="nonsense")
    with pytest.raises(ValueError):
        RecoveryConfig(query_budget=10, init_mode="face_image")


def test_trace_jsonl_roundtrip(tmp_path):
    oracle = small_oracle()
    target = oracle.embed_batch([race_image()])[0]
    cfg = RecoveryConfig(query_budget=500, batch_size=16, canvas_size=(64, 64),
                         dictionary_grid=SMALL_GRID, seed=8)
    _, trace = recover(oracle, target, cfg)
    p = tmp_path / "trace.jsonl"
    save_trace(trace, p)
    back = load_trace_records(p)
    assert len(back) == len(trace.records)
    for orig, rec in zip(trace.records, back):
        assert rec == orig


def test_iteration_record_json_roundtrip():
    rec = IterationRecord(3, 196, -0.8125, 0.8125, GaussianBlob(1.5, 2.5, 3.0, 4.0, -0.05))
    again = IterationRecord.from_json_obj(rec.to_json_obj())
    assert again == rec


def test_trace_summary_fields():
    oracle = small_oracle()
    target = oracle.embed_batch([race_image()])[0]
    cfg = RecoveryConfig(query_budget=500, batch_size=32, canvas_size=(64, 64),
                         dictionary_grid=SMALL_GRID, seed=9)
    _, trace = recover(oracle, target, cfg)
    s = trace.summary()
    assert s["total_queries"] == trace.total_queries
    assert s["iterations"] == len(trace.records)
    assert s["final_similarity"] == trace.records[-1].cosine
    assert s["error"] is None
    assert -1.0 <= s["init_cosine"] <= 1.0
