"""Label corruption for robustness experiments.

``missing`` drops each positive label independently; ``flip`` inverts every
one of the L label bits independently, so it both drops true labels and adds
spurious ones.  Features are never touched.
"""
import warnings
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class NoiseSpec:
    mode: str
    rate: float
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("missing", "flip"):
            raise ValueError(f"noise mode must be 'missing' or 'flip', got {self.mode!r}")
        if not 0.0 <= self.rate <= 1.0:
            raise ValueError(f"noise rate must lie in [0, 1], got {self.rate}")


@dataclass
class NoiseStats:
    removed: int
    added: int
    positives_before: int
    positives_after: int

    def summary(self):
        return (f"removed={self.removed} added={self.added} "
                f"positives_before={self.positives_before} positives_after={self.positives_after}")


def _rebuild(d, keep_mask=None, rows=None, labels=None):
    if keep_mask is not None:
        rows = np.repeat(np.arange(len(d)), d.label_counts())[keep_mask]
        labels = d.label_indices[keep_mask]
    indptr = np.zeros(len(d) + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=len(d)), out=indptr[1:])
    return d.with_labels(indptr, labels)


def inject_missing(d, spec, return_stats=False):
    if spec.mode != "missing":
        raise ValueError("inject_missing needs a NoiseSpec with mode='missing'")
    rng = np.random.default_rng(spec.seed)
    keep = rng.random(len(d.label_indices)) >= spec.rate
    out = _rebuild(d, keep_mask=keep)
    if return_stats:
        n = len(d.label_indices)
        return out, NoiseStats(int(n - keep.sum()), 0, n, int(keep.sum()))
    return out


def inject_flip(d, spec, return_stats=False, chunk=4096):
    if spec.mode != "flip":
        raise ValueError("inject_flip needs a NoiseSpec with mode='flip'")
    N, L = len(d), d.num_labels
    avg_card = len(d.label_indices) / max(N, 1)
    if spec.rate * L > 5 * max(avg_card, 1e-12):
        warnings.warn(f"flip rate {spec.rate} over L={L} labels adds ~{spec.rate * L:.1f} labels per "
                      f"instance against an average cardinality of {avg_card:.2f}; noise dominates signal",
                      RuntimeWarning, stacklevel=2)
    rng = np.random.default_rng(spec.seed)
    rows_out, labels_out = [], []
    removed = added = 0
    for start in range(0, N, chunk):
        part = d.take(np.arange(start, min(start + chunk, N)))
        Y = part.label_matrix()
        flips = rng.random(Y.shape) < spec.rate
        new = Y ^ flips
        removed += int((Y & flips).sum())
        added += int((~Y & flips).sum())
        r, c = np.nonzero(new)
        rows_out.append(r + start)
        labels_out.append(c)
    rows = np.concatenate(rows_out) if rows_out else np.zeros(0, dtype=np.int64)
    labels = np.concatenate(labels_out) if labels_out else np.zeros(0, dtype=np.int64)
    out = _rebuild(d, rows=rows, labels=labels)
    if return_stats:
        n = len(d.label_indices)
        return out, NoiseStats(removed, added, n, len(labels))
    return out


def inject(d, spec, return_stats=False):
    fn = inject_missing if spec.mode == "missing" else inject_flip
    return fn(d, spec, return_stats=return_stats)
