import math

import numpy as np
import pytest

from rank_ae.data import Dataset
from rank_ae.metrics import (MetricsReport, metrics_from_scores, ndcg_at_k, ndcg_at_k_batch, precision_at_k,
                             precision_at_k_batch)


def test_precision_hand_value():
    assert abs(precision_at_k([1, 3], [0.1, 0.9, 0.3, 0.8], 3) - 2 / 3) < 1e-12


def test_precision_perfect_and_empty():
    assert precision_at_k([0, 1], [0.9, 0.8, 0.1], 2) == 1.0
    assert precision_at_k([], [0.9, 0.8, 0.1], 2) == 0.0


def test_ndcg_hand_values():
    assert abs(ndcg_at_k([1, 3], [0.1, 0.9, 0.3, 0.8], 3) - 1.0) < 1e-12
    expect = 0.5 / (1 + 1 / math.log2(3))
    assert abs(ndcg_at_k([1, 3], [0.9, 0.1, 0.8, 0.2], 3) - expect) < 1e-12
    assert abs(expect - 0.3066) < 1e-4
    assert ndcg_at_k([], [0.1, 0.2], 1) == 0.0


@pytest.mark.parametrize("k", [0, 5])
def test_k_bounds(k):
    with pytest.raises(ValueError):
        precision_at_k([0], [0.1, 0.2, 0.3, 0.4], k)
    with pytest.raises(ValueError):
        ndcg_at_k([0], [0.1, 0.2, 0.3, 0.4], k)


def _brute(y, scores, k):
    """Rank by sorting (score desc, index asc) pairs."""
    order = [l for _, l in sorted((-s, l) for l, s in enumerate(scores))][:k]
    hits = [1 if l in y else 0 for l in order]
    p = sum(hits) / k
    if not y:
        return p, 0.0
    dcg = sum(h / math.log(i + 2, 2) for i, h in enumerate(hits))
    idcg = sum(1 / math.log(i + 2, 2) for i in range(min(k, len(y))))
    return p, dcg / idcg


def test_random_cases_against_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(500):
        L = int(rng.integers(1, 25))
        y = set(rng.choice(L, size=int(rng.integers(0, L + 1)), replace=False).tolist())
        scores = np.round(rng.random(L), 1)  # plenty of ties
        k = int(rng.integers(1, L + 1))
        p, n = _brute(y, scores.tolist(), k)
        assert abs(precision_at_k(sorted(y), scores, k) - p) < 1e-12
        assert abs(ndcg_at_k(sorted(y), scores, k) - n) < 1e-12


def test_batch_forms_match_single():
    rng = np.random.default_rng(1)
    L = 9
    labels = [sorted(rng.choice(L, size=int(rng.integers(0, 4)), replace=False).tolist()) for _ in range(20)]
    S = rng.random((20, L))
    indptr = np.cumsum([0] + [len(l) for l in labels])
    idx = np.array([l for ls in labels for l in ls], dtype=np.int64)
    for k in (1, 3, 5):
        pb, nb = precision_at_k_batch(indptr, idx, S, k), ndcg_at_k_batch(indptr, idx, S, k)
        for i in range(20):
            assert pb[i] == pytest.approx(precision_at_k(labels[i], S[i], k))
            assert nb[i] == pytest.approx(ndcg_at_k(labels[i], S[i], k))


def test_bounds_and_k1_identity():
    rng = np.random.default_rng(2)
    for _ in range(200):
        L = int(rng.integers(1, 10))
        y = sorted(rng.choice(L, size=int(rng.integers(1, L + 1)), replace=False).tolist())
        s = rng.random(L)
        for k in range(1, L + 1):
            assert 0 <= precision_at_k(y, s, k) <= 1 and 0 <= ndcg_at_k(y, s, k) <= 1
        assert precision_at_k(y, s, 1) == ndcg_at_k(y, s, 1)


def _ds(labels, L):
    return Dataset.from_rows(1, L, [([(0, 1.0)], l) for l in labels])


def test_identical_instances_mean():
    d = _ds([[1, 3]] * 4, 4)
    S = np.tile([0.1, 0.9, 0.3, 0.8], (4, 1))
    r = metrics_from_scores(d, S, ks=[3])
    assert abs(r.p_at_k[0] - 2 / 3) < 1e-12


def test_perfect_predictor_with_empty_rows():
    labels = [[0], [], [1, 2], []]
    d = _ds(labels, 3)
    S = np.array([[1.0 if l in ls else 0.0 for l in range(3)] for ls in labels])
    assert metrics_from_scores(d, S, ks=[1]).p_at_k[0] == 0.5


def test_empty_test_set():
    with pytest.raises(ValueError):
        metrics_from_scores(_ds([], 3), np.zeros((0, 3)))


def test_report_csv_round_trip():
    r = MetricsReport([1, 3], [0.1234567891234, 2 / 3], [0.5, 1 / 3], 7)
    back = MetricsReport.from_csv(r.to_csv())
    assert back.ks == r.ks and back.p_at_k == r.p_at_k and back.ndcg_at_k == r.ndcg_at_k
