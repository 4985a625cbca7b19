import math

import numpy as np
import pytest

from rank_ae.data import LabelSet
from rank_ae.loss import bce_loss, rank_loss, rank_loss_batch, rank_loss_bruteforce


def test_maximal_separation_zero():
    loss, g = rank_loss([1, 0], [1.0, 0.0], 1.0)
    assert loss == 0 and not g.any()


def test_hand_case_one_positive():
    loss, _ = rank_loss([1, 0, 0], [0.9, 0.2, 0.5], 0.5)
    assert abs(loss - 0.2) < 1e-12


def test_hand_case_subgradient():
    loss, g = rank_loss([1, 1, 0, 0], [0.6, 0.4, 0.5, 0.1], 0.3)
    assert abs(loss - 1.0) < 1e-12
    np.testing.assert_array_equal(g, [-1, -2, 3, 0])


def test_empty_positive_set():
    loss, g = rank_loss([0, 0, 0], [0.3, 0.9, 0.1], 0.5)
    assert loss == 0 and not g.any()


def test_labelset_input_matches_dense():
    s = np.array([0.2, 0.8, 0.5, 0.4])
    assert rank_loss(LabelSet(np.array([1, 3])), s, 0.4)[0] == rank_loss([0, 1, 0, 1], s, 0.4)[0]


def test_margin_out_of_range():
    for m in (-0.1, 1.5):
        with pytest.raises(ValueError):
            rank_loss([1, 0], [0.1, 0.2], m)


def test_single_pair_zero_margin():
    for sp, sn in [(0.3, 0.7), (0.7, 0.3)]:
        expect = 2 * max(sn - sp, 0)
        assert math.isclose(rank_loss_bruteforce([1, 0], [sp, sn], 0.0), expect)
        assert math.isclose(rank_loss([1, 0], [sp, sn], 0.0)[0], expect)


def test_constant_scores_zero_margin():
    assert rank_loss([1, 0, 1, 0], np.full(4, 0.4), 0.0)[0] == 0
    assert rank_loss_bruteforce([1, 0, 1, 0], np.full(4, 0.4), 0.0) == 0


def test_matches_bruteforce_random():
    rng = np.random.default_rng(7)
    for _ in range(2000):
        L = int(rng.integers(1, 30))
        y = (rng.random(L) < rng.random()).astype(int)
        s = rng.random(L)
        m = float(rng.choice([0, 0.3, 0.5, 1.0]))
        assert abs(rank_loss(y, s, m)[0] - rank_loss_bruteforce(y, s, m)) < 1e-9


def test_subgradient_sums_to_zero_and_zero_iff_separated():
    rng = np.random.default_rng(8)
    for _ in range(500):
        L = int(rng.integers(2, 20))
        y = np.zeros(L, dtype=int)
        y[rng.choice(L, size=int(rng.integers(1, L)), replace=False)] = 1
        s = rng.random(L)
        m = float(rng.uniform(0, 1))
        loss, g = rank_loss(y, s, m)
        assert g.sum() == 0
        gap = s[y == 1].min() - s[y == 0].max()
        assert (loss == 0) == (gap >= m)


def test_monotone_in_margin():
    rng = np.random.default_rng(9)
    y, s = (rng.random(15) < 0.3).astype(int), rng.random(15)
    losses = [rank_loss(y, s, m)[0] for m in np.linspace(0, 1, 11)]
    assert all(a <= b for a, b in zip(losses, losses[1:]))


def test_permutation_invariance():
    rng = np.random.default_rng(10)
    y, s = (rng.random(12) < 0.4).astype(int), rng.random(12)
    perm = rng.permutation(12)
    assert math.isclose(rank_loss(y, s, 0.5)[0], rank_loss(y[perm], s[perm], 0.5)[0])


def test_gradient_matches_finite_differences_off_kinks():
    rng = np.random.default_rng(11)
    checked = 0
    while checked < 50:
        L = int(rng.integers(3, 12))
        y = np.zeros(L, dtype=int)
        y[rng.choice(L, size=int(rng.integers(1, L)), replace=False)] = 1
        s, m = rng.random(L), 0.5
        P, N = s[y == 1], s[y == 0]
        args = np.concatenate([m + N - P.min(), m + N.max() - P])
        # skip hinge kinks and arg-min/arg-max ties
        close = lambda v: len(v) > 1 and np.min(np.diff(np.sort(v))) < 1e-4
        if np.min(np.abs(args)) < 1e-4 or close(P) or close(N):
            continue
        _, g = rank_loss(y, s, m)
        eps = 1e-7
        for i in range(L):
            e = np.zeros(L)
            e[i] = eps
            num = (rank_loss(y, s + e, m)[0] - rank_loss(y, s - e, m)[0]) / (2 * eps)
            assert abs(num - g[i]) / max(1e-8, abs(num) + abs(g[i])) < 1e-6
        checked += 1


def test_batch_equals_rows():
    rng = np.random.default_rng(12)
    S = rng.random((5, 6))
    labels = [[0, 2], [], [1, 2, 3, 4, 5], [5], [0, 1, 2, 3, 4, 5]]
    indptr = np.cumsum([0] + [len(l) for l in labels])
    loss, grad = rank_loss_batch(indptr, np.concatenate(labels).astype(np.int64), S, 0.3)
    for i, l in enumerate(labels):
        y = np.zeros(6, dtype=int)
        y[l] = 1
        ref, g = rank_loss(y, S[i], 0.3)
        assert loss[i] == pytest.approx(ref, abs=1e-12)
        np.testing.assert_array_equal(grad[i], g)


def test_bce_examples():
    loss, g = bce_loss([1], [0.5])
    assert abs(loss - math.log(2)) < 1e-12
    assert g[0] < 0
    loss, _ = bce_loss([1, 0], [1.0, 0.0])
    assert loss < 1e-6


def test_bce_gradient_finite_differences():
    rng = np.random.default_rng(13)
    y, s = (rng.random(8) < 0.5).astype(int), rng.uniform(0.05, 0.95, 8)
    _, g = bce_loss(y, s)
    for i in range(8):
        e = np.zeros(8)
        e[i] = 1e-6
        num = (bce_loss(y, s + e)[0] - bce_loss(y, s - e)[0]) / 2e-6
        assert abs(num - g[i]) < 1e-6
