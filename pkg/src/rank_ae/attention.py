"""Dual attention feature embedder.

Pipeline for one instance with active features j (index w_j, value v_j):

    V'_j = v_j * E[w_j]                      spatial weighting, no parameters
    A_j  = sigmoid(F2 relu(F1 V'_j))         channel excitation, shared F1/F2
    x'   = mean_j (V'_j * A_j)               rescale and average-pool

Only active features are touched, so the cost is O(nnz * C^2 / r).  All
functions accept a whole minibatch in CSR layout; a single instance is the
batch of one.
"""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .nncore import Parameter, init_params, relu_backward, relu_forward, sigmoid_forward


@dataclass
class WeightedEmbeddings:
    """Rows of ``matrix`` are v_j * E[indices[j]]; ``indptr`` delimits instances."""
    indptr: np.ndarray
    indices: np.ndarray
    values: np.ndarray
    matrix: np.ndarray

    @property
    def n_active(self):
        return np.diff(self.indptr)

    @property
    def num_instances(self):
        return len(self.indptr) - 1


class AttentionParams:
    """Bias-free excitation layers F1 (C/r x C) and F2 (C x C/r)."""

    def __init__(self, f1, f2, reduction):
        self.f1 = f1 if isinstance(f1, Parameter) else Parameter(f1)
        self.f2 = f2 if isinstance(f2, Parameter) else Parameter(f2)
        self.reduction = int(reduction)
        C = self.f1.shape[1]
        if self.reduction < 1 or C % self.reduction:
            raise ValueError(f"reduction ratio {reduction} must be >= 1 and divide C={C}")
        if self.f1.shape != (C // self.reduction, C) or self.f2.shape != (C, C // self.reduction):
            raise ValueError(f"F1 {self.f1.shape} / F2 {self.f2.shape} inconsistent with C={C}, r={reduction}")

    @classmethod
    def create(cls, rng, C, reduction, dtype=np.float64):
        if reduction < 1 or C % reduction:
            raise ValueError(f"reduction ratio {reduction} must be >= 1 and divide C={C}")
        k = C // reduction
        return cls(init_params(rng, (k, C), dtype), init_params(rng, (C, k), dtype), reduction)

    @property
    def dim(self):
        return self.f1.shape[1]

    def parameters(self):
        return [self.f1, self.f2]


@dataclass
class AttentionCache:
    weighted: WeightedEmbeddings
    pre_relu: np.ndarray | None
    hidden: np.ndarray | None
    attention: np.ndarray | None


def _as_batch(x):
    """SparseVector -> (indptr, indices, values) of a one-row batch."""
    idx = np.asarray(x.indices, dtype=np.int64)
    return np.array([0, len(idx)], dtype=np.int64), idx, np.asarray(x.values)


def spatial_weight(x, E):
    """Scale each active feature's embedding row by its feature value."""
    return spatial_weight_batch(*_as_batch(x), E)


def spatial_weight_batch(indptr, indices, values, E):
    indices = np.asarray(indices, dtype=np.int64)
    if len(indices) and (indices.min() < 0 or indices.max() >= E.shape[0]):
        raise IndexError(f"feature index outside embedding table of {E.shape[0]} rows")
    matrix = E[indices] * np.asarray(values, dtype=E.dtype)[:, None]
    return WeightedEmbeddings(np.asarray(indptr, dtype=np.int64), indices, values, matrix)


def _excite(matrix, p):
    if matrix.shape[-1] != p.dim:
        raise ValueError(f"embedding width {matrix.shape[-1]} does not match attention C={p.dim}")
    z1 = matrix @ p.f1.value.T
    h1 = relu_forward(z1)
    A = sigmoid_forward(h1 @ p.f2.value.T)
    return z1, h1, A


def channel_attention(weighted, p):
    """Attention matrix A (nnz x C), each row computed independently."""
    matrix = weighted.matrix if isinstance(weighted, WeightedEmbeddings) else np.asarray(weighted)
    return _excite(matrix, p)[2]


def rescale_and_pool(weighted, A=None):
    """x' = per-instance mean of V' * A; instances without features pool to 0.

    ``A=None`` pools V' directly (the no-attention variant).
    """
    M = weighted.matrix if A is None else weighted.matrix * A
    n = weighted.n_active
    pooled = kernels.segment_sum(M, weighted.indptr)
    return pooled / np.maximum(n, 1)[:, None].astype(pooled.dtype)


def attention_forward(weighted, p, use_attention=True):
    """Batched x' (B x C) plus the cache needed by ``attention_backward``."""
    if not use_attention:
        return rescale_and_pool(weighted), AttentionCache(weighted, None, None, None)
    z1, h1, A = _excite(weighted.matrix, p)
    return rescale_and_pool(weighted, A), AttentionCache(weighted, z1, h1, A)


def attention_backward(grad_pooled, cache, p):
    """Gradients of x' w.r.t. the gathered embedding rows, F1 and F2.

    Returns ``(grad_rows, grad_f1, grad_f2)``; ``grad_rows[t]`` is the
    gradient for embedding row ``cache.weighted.indices[t]`` (already scaled by
    the feature value).  ``grad_f1``/``grad_f2`` are None without attention.
    """
    if cache is None:
        raise ValueError("attention_backward needs the forward cache")
    w = cache.weighted
    n = np.maximum(w.n_active, 1).astype(grad_pooled.dtype)
    # every active row of instance b receives grad_pooled[b] / n_b
    per_row = np.repeat(grad_pooled / n[:, None], w.n_active, axis=0)

    if cache.attention is None:
        grad_v = per_row
        grad_f1 = grad_f2 = None
    else:
        A = cache.attention
        grad_v = per_row * A
        grad_z2 = per_row * w.matrix * A * (1 - A)
        grad_f2 = grad_z2.T @ cache.hidden
        grad_z1 = relu_backward(cache.pre_relu, grad_z2 @ p.f2.value)
        grad_f1 = grad_z1.T @ w.matrix
        grad_v = grad_v + grad_z1 @ p.f1.value
    grad_rows = grad_v * np.asarray(w.values, dtype=grad_v.dtype)[:, None]
    return grad_rows, grad_f1, grad_f2


def attention_mass(A, active_indices):
    """Total attention per active feature, sorted by mass descending.

    Ties go to the lower feature index first.
    """
    A = np.asarray(A)
    mass = A.sum(axis=1) if A.ndim == 2 else np.asarray([A.sum()])
    order = sorted(range(len(mass)), key=lambda j: (-mass[j], int(active_indices[j])))
    return [(int(active_indices[j]), float(mass[j])) for j in order]

