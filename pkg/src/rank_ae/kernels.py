"""Hot inner loops, each in a numba and a pure-numpy flavour.

The public names (``rank_loss_rows``, ``segment_sum``, ``scatter_add_rows``)
resolve to the numba versions unless ``RANK_AE_NUMBA=0`` is set.  The
``*_numpy`` / ``*_numba`` variants stay importable for tests and benchmarks.

All kernels take CSR-style ragged layouts: ``indptr`` of length ``B + 1`` and a
flat ``indices`` array.
"""
import numpy as np

from ._accel import USE_NUMBA, njit, prange


# ---------------------------------------------------------------------------
# margin ranking loss, one row per instance
# ---------------------------------------------------------------------------

def rank_loss_rows_numpy(label_indptr, label_indices, scores, margin):
    """Per-row ranking hinge loss and its subgradient.

    Returns ``(loss, grad)`` with ``loss`` float64 of shape ``(B,)`` and
    ``grad`` shaped like ``scores``.
    """
    B, L = scores.shape
    s = scores.astype(np.float64, copy=False)
    pos = np.zeros((B, L), dtype=bool)
    rows = np.repeat(np.arange(B), np.diff(label_indptr))
    pos[rows, label_indices] = True
    neg = ~pos
    valid = pos.any(axis=1) & neg.any(axis=1)

    r = np.arange(B)
    # argmin/argmax return the first hit, which is the lowest-index tie rule
    p_star = np.argmin(np.where(pos, s, np.inf), axis=1)
    n_star = np.argmax(np.where(neg, s, -np.inf), axis=1)

    arg_neg = margin + s - s[r, p_star][:, None]
    arg_pos = margin + s[r, n_star][:, None] - s
    act_neg = neg & (arg_neg > 0) & valid[:, None]
    act_pos = pos & (arg_pos > 0) & valid[:, None]

    loss = np.where(act_neg, arg_neg, 0.0).sum(axis=1) + np.where(act_pos, arg_pos, 0.0).sum(axis=1)

    grad = act_neg.astype(np.float64) - act_pos.astype(np.float64)
    np.subtract.at(grad, (r, p_star), act_neg.sum(axis=1))
    np.add.at(grad, (r, n_star), act_pos.sum(axis=1))
    return loss, grad.astype(scores.dtype, copy=False)


@njit(parallel=True, cache=True)
def _rank_loss_rows_nb(label_indptr, label_indices, scores, margin, loss, grad):
    B, L = scores.shape
    for b in prange(B):
        pos = np.zeros(L, dtype=np.bool_)
        for t in range(label_indptr[b], label_indptr[b + 1]):
            pos[label_indices[t]] = True
        p_star = -1
        n_star = -1
        for l in range(L):
            if pos[l]:
                if p_star < 0 or scores[b, l] < scores[b, p_star]:
                    p_star = l
            else:
                if n_star < 0 or scores[b, l] > scores[b, n_star]:
                    n_star = l
        if p_star < 0 or n_star < 0:
            continue
        sp = np.float64(scores[b, p_star])
        sn = np.float64(scores[b, n_star])
        total = 0.0
        for l in range(L):
            sl = np.float64(scores[b, l])
            if pos[l]:
                a = margin + sn - sl
                if a > 0:
                    total += a
                    grad[b, n_star] += 1
                    grad[b, l] -= 1
            else:
                a = margin + sl - sp
                if a > 0:
                    total += a
                    grad[b, l] += 1
                    grad[b, p_star] -= 1
        loss[b] = total


def rank_loss_rows_numba(label_indptr, label_indices, scores, margin):
    scores = np.ascontiguousarray(scores)
    loss = np.zeros(scores.shape[0], dtype=np.float64)
    grad = np.zeros_like(scores)
    _rank_loss_rows_nb(np.asarray(label_indptr, dtype=np.int64),
                       np.asarray(label_indices, dtype=np.int64),
                       scores, float(margin), loss, grad)
    return loss, grad


# ---------------------------------------------------------------------------
# ragged row sums (pooling, sparse one-hot products)
# ---------------------------------------------------------------------------

def segment_sum_numpy(rows, indptr):
    """``out[b] = rows[indptr[b]:indptr[b+1]].sum(0)``; empty segments give 0."""
    B = len(indptr) - 1
    out = np.zeros((B,) + rows.shape[1:], dtype=rows.dtype)
    starts = np.asarray(indptr[:-1])
    nonempty = starts < np.asarray(indptr[1:])
    if nonempty.any():
        out[nonempty] = np.add.reduceat(rows[: indptr[-1]], starts[nonempty], axis=0)
    return out


@njit(parallel=True, cache=True)
def _segment_sum_nb(rows, indptr, out):
    B = out.shape[0]
    C = rows.shape[1]
    for b in prange(B):
        for t in range(indptr[b], indptr[b + 1]):
            for c in range(C):
                out[b, c] += rows[t, c]


def segment_sum_numba(rows, indptr):
    B = len(indptr) - 1
    out = np.zeros((B, rows.shape[1]), dtype=rows.dtype)
    _segment_sum_nb(rows, np.asarray(indptr, dtype=np.int64), out)
    return out


# ---------------------------------------------------------------------------
# scatter-add (embedding / one-hot weight gradients)
# ---------------------------------------------------------------------------

def scatter_add_rows_numpy(target, indices, rows):
    """``target[indices[t]] += rows[t]`` in place, duplicates accumulate."""
    np.add.at(target, indices, rows)
    return target


@njit(cache=True)
def _scatter_add_rows_nb(target, indices, rows):
    # serial on purpose: fixed accumulation order regardless of thread count
    C = rows.shape[1]
    for t in range(indices.shape[0]):
        j = indices[t]
        for c in range(C):
            target[j, c] += rows[t, c]


def scatter_add_rows_numba(target, indices, rows):
    _scatter_add_rows_nb(target, np.asarray(indices, dtype=np.int64), rows)
    return target


if USE_NUMBA:
    rank_loss_rows = rank_loss_rows_numba
    segment_sum = segment_sum_numba
    scatter_add_rows = scatter_add_rows_numba
else:
    rank_loss_rows = rank_loss_rows_numpy
    segment_sum = segment_sum_numpy
    scatter_add_rows = scatter_add_rows_numpy
