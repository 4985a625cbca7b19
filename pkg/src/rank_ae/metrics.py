"""Precision@k and nDCG@k for ranked label predictions."""
import math
from dataclasses import dataclass

import numpy as np


@dataclass
class MetricsReport:
    ks: list
    p_at_k: list
    ndcg_at_k: list
    n_instances: int

    def rows(self):
        out = [("P", k, v) for k, v in zip(self.ks, self.p_at_k)]
        out += [("nDCG", k, v) for k, v in zip(self.ks, self.ndcg_at_k)]
        return out

    def to_csv(self):
        lines = ["metric,k,value"]
        lines += [f"{m},{k},{v!r}" for m, k, v in self.rows()]
        return "\n".join(lines) + "\n"

    def to_table(self):
        lines = [f"{'metric':<8}{'k':>4}{'value':>12}"]
        lines += [f"{m + '@' + str(k):<8}{k:>4}{v * 100:>11.2f}%" for m, k, v in self.rows()]
        lines.append(f"({self.n_instances} instances)")
        return "\n".join(lines)

    @classmethod
    def from_csv(cls, text):
        p, n = {}, {}
        for line in text.strip().splitlines()[1:]:
            m, k, v = line.split(",")
            (p if m == "P" else n)[int(k)] = float(v)
        ks = sorted(p)
        return cls(ks, [p[k] for k in ks], [n[k] for k in ks], n_instances=-1)


def _check_k(k, L):
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > L:
        raise ValueError(f"k={k} exceeds the number of labels L={L}")


def _positives(y):
    return set(np.asarray(y.labels if hasattr(y, "labels") else y).tolist())


def _ranking(scores, k):
    return np.argsort(-np.asarray(scores), kind="stable")[:k]


def precision_at_k(y, scores, k):
    """Fraction of the top-k scored labels that are positive (denominator k)."""
    _check_k(k, len(scores))
    pos = _positives(y)
    return sum(1 for l in _ranking(scores, k).tolist() if l in pos) / k


def dcg_at_k(y, scores, k):
    pos = _positives(y)
    return sum(1.0 / math.log2(r + 2) for r, l in enumerate(_ranking(scores, k).tolist()) if l in pos)


def ndcg_at_k(y, scores, k):
    """DCG over the top-k positions normalised by the ideal DCG of
    min(k, |y|) hits; 0 when y is empty."""
    _check_k(k, len(scores))
    pos = _positives(y)
    if not pos:
        return 0.0
    ideal = sum(1.0 / math.log2(r + 2) for r in range(min(k, len(pos))))
    return dcg_at_k(pos, scores, k) / ideal


# -- batched forms used by evaluate and training -----------------------------

def _hits(label_indptr, label_indices, scores, k):
    B, L = scores.shape
    _check_k(k, L)
    top = np.argsort(-scores, axis=1, kind="stable")[:, :k]
    Y = np.zeros((B, L), dtype=bool)
    Y[np.repeat(np.arange(B), np.diff(label_indptr)), label_indices] = True
    return np.take_along_axis(Y, top, axis=1)


def precision_at_k_batch(label_indptr, label_indices, scores, k):
    return _hits(label_indptr, label_indices, scores, k).sum(axis=1) / k


def ndcg_at_k_batch(label_indptr, label_indices, scores, k):
    hits = _hits(label_indptr, label_indices, scores, k)
    disc = 1.0 / np.log2(np.arange(2, k + 2))
    dcg = hits @ disc
    n_pos = np.minimum(np.diff(label_indptr), k)
    ideal = np.concatenate([[0.0], np.cumsum(disc)])[n_pos]
    return np.divide(dcg, ideal, out=np.zeros_like(dcg), where=ideal > 0)


def metrics_from_scores(data, scores, ks=(1, 3, 5)):
    if len(data) == 0:
        raise ValueError("cannot evaluate on an empty test set")
    ks = list(ks)
    p = [float(np.mean(precision_at_k_batch(data.label_indptr, data.label_indices, scores, k))) for k in ks]
    n = [float(np.mean(ndcg_at_k_batch(data.label_indptr, data.label_indices, scores, k))) for k in ks]
    return MetricsReport(ks, p, n, len(data))


def evaluate(params, test, cfg, ks=(1, 3, 5)):
    """Average P@k and nDCG@k of the model over ``test``."""
    from .model import predict_scores
    if test.num_features != cfg.num_features or test.num_labels != cfg.num_labels:
        raise ValueError(f"test set dims (V={test.num_features}, L={test.num_labels}) do not match "
                         f"model (V={cfg.num_features}, L={cfg.num_labels})")
    if len(test) == 0:
        raise ValueError("cannot evaluate on an empty test set")
    return metrics_from_scores(test, predict_scores(params, test, cfg), ks)
