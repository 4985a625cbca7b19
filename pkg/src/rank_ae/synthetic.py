"""Synthetic multi-label data whose ground truth is a known linear scorer.

The generating map ``W`` (L x V) gives every feature one owning label with
weight U(1, 2), plus N(0, noise^2) cross-talk on all entries.  An instance
activates a few features with values U(0.2, 1) and is labelled with the top-k
labels of ``W @ x``.  Draws whose k-th and (k+1)-th scores are closer than
``separation`` are rejected, so the label sets are separable with a margin.
"""
import numpy as np

from .data import Dataset


def planted_map(rng, num_labels, num_features, noise=0.3):
    W = noise * rng.normal(size=(num_labels, num_features))
    owner = rng.permutation(np.arange(num_features) % num_labels)
    W[owner, np.arange(num_features)] += rng.uniform(1.0, 2.0, size=num_features)
    return W


def _draw(rng, W, n, min_active, max_active, cardinalities, separation):
    L, V = W.shape
    choices = sorted(cardinalities)
    probs = [cardinalities[c] for c in choices]
    rows = []
    while len(rows) < n:
        n_act = int(rng.integers(min_active, max_active + 1))
        idx = np.sort(rng.choice(V, size=n_act, replace=False))
        vals = rng.uniform(0.2, 1.0, size=n_act)
        k = int(rng.choice(choices, p=probs))
        scores = W[:, idx] @ vals
        order = np.argsort(-scores, kind="stable")
        if k < L and scores[order[k - 1]] - scores[order[k]] < separation:
            continue
        rows.append((list(zip(idx.tolist(), vals.tolist())), order[:k].tolist()))
    return Dataset.from_rows(V, L, rows)


def make_topk_dataset(n_train=200, n_test=100, num_features=20, num_labels=10, k=2,
                      min_active=2, max_active=4, noise=0.3, separation=0.3, seed=0,
                      cardinalities=None):
    """Train/test pair plus the generating matrix.

    ``cardinalities`` (``{k: prob}``) draws a per-instance label count in
    place of the fixed ``k``.
    """
    rng = np.random.default_rng(seed)
    W = planted_map(rng, num_labels, num_features, noise)
    card = {k: 1.0} if cardinalities is None else cardinalities
    train = _draw(rng, W, n_train, min_active, max_active, card, separation)
    test = _draw(rng, W, n_test, min_active, max_active, card, separation)
    return train, test, W


def make_separable(seed=0):
    """200 train / 100 test, 20 features, 10 labels, labels = top-2."""
    return make_topk_dataset(200, 100, 20, 10, k=2, seed=seed)


# label-count mix with mean 2.4, the cardinality of a small genre-tagging set;
# margin rejection favours small k, so realised means come out near 1.9
IMDB_LIKE_CARDINALITY = {1: 0.2, 2: 0.35, 3: 0.3, 4: 0.15}


def make_imdb_like(n_train=1000, n_test=500, num_features=84, seed=0, **kw):
    """28-label synthetic set for the label-noise experiments."""
    kw.setdefault("min_active", 3)
    kw.setdefault("max_active", 6)
    return make_topk_dataset(n_train, n_test, num_features, 28, seed=seed,
                             cardinalities=IMDB_LIKE_CARDINALITY, **kw)


def frequency_baseline_scores(train, n_rows):
    """Every instance gets the training label frequencies as scores."""
    freq = np.bincount(train.label_indices, minlength=train.num_labels).astype(np.float64)
    return np.tile(freq / max(len(train), 1), (n_rows, 1))
