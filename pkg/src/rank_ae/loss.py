"""Margin ranking loss over label scores, its brute-force twin, and BCE.

For one instance with positives P and negatives N, the ranking loss is

    sum_{n in N} (m + s_n - min_P s)_+  +  sum_{p in P} (m + max_N s - s_p)_+

which costs O(L): the inner max over the opposite side of each pair is always
attained at the lowest-scored positive / highest-scored negative.
"""
from dataclasses import dataclass

import numpy as np

from . import kernels

BCE_CLAMP = 1e-7


@dataclass(frozen=True)
class LossConfig:
    margin: float = 0.6
    kind: str = "rank"

    def __post_init__(self):
        _check_margin(self.margin)
        if self.kind not in ("rank", "bce"):
            raise ValueError(f"loss kind must be 'rank' or 'bce', got {self.kind!r}")


def _check_margin(m):
    if not 0.0 <= m <= 1.0:
        raise ValueError(f"margin must lie in [0, 1], got {m}")


def _labels_array(y, L):
    """Positive label ids from a LabelSet or a dense 0/1 vector of length L."""
    if hasattr(y, "labels"):
        labels = np.asarray(y.labels, dtype=np.int64)
        if len(labels) and (labels.min() < 0 or labels.max() >= L):
            raise ValueError(f"label index outside [0, {L})")
        return labels
    y = np.asarray(y)
    if y.shape != (L,):
        raise ValueError(f"dense label vector must have length {L}, got shape {y.shape}")
    return np.flatnonzero(y).astype(np.int64)


def rank_loss(y, s, m):
    """Ranking loss of one instance and its subgradient w.r.t. the scores.

    ``y`` is a LabelSet or a dense 0/1 vector; ``s`` the score vector.
    Strict hinge: an argument of exactly 0 contributes nothing.  Ties in the
    arg-min / arg-max are broken toward the lowest label index.
    """
    _check_margin(m)
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 1 or len(s) < 1:
        raise ValueError("scores must be a non-empty vector")
    labels = _labels_array(y, len(s))
    loss, grad = kernels.rank_loss_rows(np.array([0, len(labels)]), labels, s[None, :], m)
    return float(loss[0]), grad[0]


def rank_loss_batch(label_indptr, label_indices, scores, m):
    """Per-row losses ``(B,)`` and subgradients ``(B, L)`` for a score matrix."""
    _check_margin(m)
    return kernels.rank_loss_rows(label_indptr, label_indices, scores, m)


def rank_loss_bruteforce(y, s, m):
    """Literal double sum over all (positive, negative) pairs; test oracle."""
    s = [float(v) for v in s]
    labels = set(_labels_array(y, len(s)).tolist())
    P = [i for i in range(len(s)) if i in labels]
    N = [i for i in range(len(s)) if i not in labels]
    if not P or not N:
        return 0.0
    hinge = lambda p, n: max(m + s[n] - s[p], 0.0)
    loss_p = sum(max(hinge(p, n) for p in P) for n in N)
    loss_n = sum(max(hinge(p, n) for n in N) for p in P)
    return loss_p + loss_n


def bce_loss(y, s):
    """Mean binary cross-entropy over labels and its gradient w.r.t. ``s``."""
    s = np.asarray(s, dtype=np.float64)
    t = np.zeros(len(s))
    t[_labels_array(y, len(s))] = 1.0
    loss, grad = bce_rows(t[None, :], s[None, :])
    return float(loss[0]), grad[0]


def bce_rows(targets, scores):
    """Row-wise BCE on dense 0/1 targets. Scores are clamped to
    ``[1e-7, 1 - 1e-7]`` before the logs; the gradient is taken at the clamped
    point."""
    L = scores.shape[-1]
    sc = np.clip(scores.astype(np.float64, copy=False), BCE_CLAMP, 1.0 - BCE_CLAMP)
    loss = -(targets * np.log(sc) + (1 - targets) * np.log1p(-sc)).sum(axis=-1) / L
    grad = (sc - targets) / (sc * (1 - sc)) / L
    return loss, grad.astype(scores.dtype, copy=False)
