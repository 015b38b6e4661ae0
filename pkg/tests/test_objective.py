import math

import numpy as np
import pytest

from blobvert import LossParams, cosine_similarity, loss, select_best
from blobvert.oracle import Embedding


def test_self_similarity_is_exactly_one():
    rng = np.random.default_rng(20)
    for _ in range(50):
        v = rng.normal(size=int(rng.integers(2, 40)))
        assert cosine_similarity(v, v) == 1.0


def test_orthogonal_vectors_score_zero():
    assert cosine_similarity([1.0, 0.0], [0.0, 1.0]) == 0.0


def test_analytic_example():
    assert abs(cosine_similarity([1.0, 1.0], [1.0, 0.0]) - 1 / math.sqrt(2)) < 1e-12


def test_similarity_accepts_embedding_objects():
    e = Embedding(np.array([3.0, 4.0]))
    assert cosine_similarity(e, e) == 1.0


def test_zero_norm_is_an_error():
    with pytest.raises(ValueError):
        cosine_similarity([0.0, 0.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        cosine_similarity([1.0, 2.0], [0.0, 0.0])


def test_dim_mismatch_is_an_error():
    with pytest.raises(ValueError):
        cosine_similarity([1.0, 2.0], [1.0, 2.0, 3.0])


def test_similarity_scale_invariance():
    rng = np.random.default_rng(21)
    for _ in range(30):
        a = rng.normal(size=16)
        b = rng.normal(size=16)
        k = float(rng.uniform(1e-3, 1e3))
        assert abs(cosine_similarity(k * a, b) - cosine_similarity(a, b)) < 1e-12


def test_similarity_bounded():
    rng = np.random.default_rng(22)
    for _ in range(100):
        a = rng.normal(size=8)
        b = rng.normal(size=8)
        s = cosine_similarity(a, b)
        assert -1.0 - 1e-12 <= s <= 1.0 + 1e-12


def test_self_loss_is_exactly_minus_one():
    rng = np.random.default_rng(23)
    for _ in range(20):
        v = rng.normal(size=12)
        assert loss(v, v) == -1.0


def test_worked_loss_example():
    got = loss([3.0, 4.0], [0.0, 10.0], LossParams(0.0025))
    # norms 5 and 10, similarity 0.8: 0.0025 * 25 - 0.8
    assert abs(got - (-0.7375)) < 1e-12


def test_equal_norms_reduce_loss_to_cosine():
    rng = np.random.default_rng(24)
    a = rng.normal(size=10)
    b = rng.normal(size=10)
    b = b * (np.linalg.norm(a) / np.linalg.norm(b))
    got = loss(a, b)
    s = cosine_similarity(a, b)
    assert abs(got + s) < 1e-12


def test_loss_lower_bound():
    rng = np.random.default_rng(25)
    for _ in range(200):
        a = rng.normal(size=6)
        b = rng.normal(size=6)
        assert loss(a, b) >= -1.0


def test_loss_is_symmetric():
    rng = np.random.default_rng(26)
    for _ in range(50):
        a = rng.normal(size=9)
        b = rng.normal(size=9)
        assert loss(a, b) == loss(b, a)


def test_cosine_only_mode_is_negated_similarity():
    rng = np.random.default_rng(27)
    a = rng.normal(size=7)
    b = rng.normal(size=7)
    assert loss(a, b, LossParams(0.0)) == -cosine_similarity(a, b)


def test_loss_params_reject_bad_lambda():
    with pytest.raises(ValueError):
        LossParams(-0.1)
    with pytest.raises(ValueError):
        LossParams(float("nan"))


def test_select_best_examples():
    assert select_best([0.3, -0.2, 0.1]) == 1
    assert select_best([0.1, 0.1]) == 0
    assert select_best([5.0]) == 0


def test_select_best_shift_invariance():
    rng = np.random.default_rng(28)
    for _ in range(50):
        losses = rng.normal(size=10)
        shift = float(rng.normal())
        assert select_best(losses) == select_best(losses + shift)


def test_select_best_rejects_bad_input():
    with pytest.raises(ValueError):
        select_best([])
    with pytest.raises(ValueError):
        select_best([0.1, float("nan")])
    with pytest.raises(ValueError):
        select_best([0.1, float("inf")])
