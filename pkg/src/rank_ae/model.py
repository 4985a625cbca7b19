"""Rank-AE: feature embedder F, label encoder E, label decoder D.

Training minimises, per minibatch,

    mean_i [ mse(F(x_i), E(y_i)) + lambda * L_ae(y_i, D(E(y_i))) ]

so the decoder is trained on label embeddings and the MSE term pulls feature
embeddings into the same space.  Inference scores labels with D(F(x)).
"""
import copy
import dataclasses
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .attention import AttentionParams, attention_backward, attention_forward, spatial_weight_batch
from .loss import bce_rows, rank_loss_batch
from .nncore import (AdamState, LinearLayer, Parameter, adam_step, init_params, linear_backward,
                     linear_forward, mse_loss, relu_backward, relu_forward, sigmoid_forward)

log = logging.getLogger(__name__)

PARAM_ORDER = (
    "embedding", "att_f1", "att_f2", "feat_w", "feat_b",
    "enc1_w", "enc1_b", "enc2_w", "enc2_b",
    "dec1_w", "dec1_b", "dec2_w", "dec2_b",
)


class TrainingError(RuntimeError):
    pass


@dataclass
class ModelConfig:
    num_features: int
    num_labels: int
    embed_dim: int = 100
    hidden: int = 100
    reduction: int = 4
    lam: float = 1.0
    margin: float = 0.6
    loss: str = "rank"
    width: int | None = None
    epochs: int = 100
    batch_size: int = 128
    seed: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    no_attention: bool = False
    deterministic: bool = False
    dtype: str = "float32"

    def __post_init__(self):
        if self.width is None:
            self.width = 2 * self.hidden
        if self.num_features < 1 or self.num_labels < 1:
            raise ValueError("num_features and num_labels must be positive")
        if self.hidden < 1 or self.width < 1 or self.embed_dim < 1:
            raise ValueError("hidden, width and embed_dim must be positive")
        if self.reduction < 1 or self.embed_dim % self.reduction:
            raise ValueError(f"reduction {self.reduction} must divide embed_dim {self.embed_dim}")
        if not self.lam >= 0:
            raise ValueError("lambda must be nonnegative")
        if not 0.0 <= self.margin <= 1.0:
            raise ValueError(f"margin must lie in [0, 1], got {self.margin}")
        if self.loss not in ("rank", "bce"):
            raise ValueError(f"loss must be 'rank' or 'bce', got {self.loss!r}")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")
        if self.dtype not in ("float32", "float64"):
            raise ValueError(f"dtype must be float32 or float64, got {self.dtype!r}")

    @property
    def np_dtype(self):
        return np.dtype(self.dtype)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


@dataclass
class EpochRecord:
    epoch: int
    l_h: float
    l_ae: float
    total: float
    val_p1: float
    seconds: float = field(compare=False)


@dataclass
class TrainReport:
    epochs: list = field(default_factory=list)
    best_epoch: int = 0

    CSV_HEADER = "epoch,l_h,l_ae,total,val_p1,seconds"

    def to_csv(self):
        lines = [self.CSV_HEADER]
        for r in self.epochs:
            lines.append(f"{r.epoch},{r.l_h!r},{r.l_ae!r},{r.total!r},{r.val_p1!r},{r.seconds:.3f}")
        return "\n".join(lines) + "\n"

    @property
    def best_val_p1(self):
        vals = [r.val_p1 for r in self.epochs if not math.isnan(r.val_p1)]
        return max(vals) if vals else float("nan")


class ModelParams:
    """All trainable arrays, addressable by the names in ``PARAM_ORDER``."""

    def __init__(self, embedding, attention, feat, enc1, enc2, dec1, dec2):
        self.embedding = embedding if isinstance(embedding, Parameter) else Parameter(embedding)
        self.attention = attention
        self.feat = feat
        self.enc1 = enc1
        self.enc2 = enc2
        self.dec1 = dec1
        self.dec2 = dec2

    @classmethod
    def create(cls, cfg, rng=None, embedding=None):
        rng = rng if rng is not None else np.random.default_rng(cfg.seed)
        dt = cfg.np_dtype
        V, L, C, h, g = cfg.num_features, cfg.num_labels, cfg.embed_dim, cfg.hidden, cfg.width
        emb = init_params(rng, (V, C), dt)
        if embedding is not None:
            embedding = np.asarray(embedding)
            if embedding.shape != (V, C):
                raise ValueError(f"embedding table shape {embedding.shape} != ({V}, {C})")
            emb = embedding.astype(dt, copy=True)
        return cls(
            emb,
            AttentionParams.create(rng, C, cfg.reduction, dt),
            LinearLayer.create(rng, C, h, dtype=dt),
            LinearLayer.create(rng, L, g, dtype=dt),
            LinearLayer.create(rng, g, h, dtype=dt),
            LinearLayer.create(rng, h, g, dtype=dt),
            LinearLayer.create(rng, g, L, dtype=dt),
        )

    def named_parameters(self):
        return [
            ("embedding", self.embedding),
            ("att_f1", self.attention.f1), ("att_f2", self.attention.f2),
            ("feat_w", self.feat.weight), ("feat_b", self.feat.bias),
            ("enc1_w", self.enc1.weight), ("enc1_b", self.enc1.bias),
            ("enc2_w", self.enc2.weight), ("enc2_b", self.enc2.bias),
            ("dec1_w", self.dec1.weight), ("dec1_b", self.dec1.bias),
            ("dec2_w", self.dec2.weight), ("dec2_b", self.dec2.bias),
        ]

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def arrays(self):
        return {name: p.value for name, p in self.named_parameters()}

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def copy(self):
        return copy.deepcopy(self)

    def astype(self, dtype):
        out = self.copy()
        for p in out.parameters():
            p.value = p.value.astype(dtype)
            p.grad = np.zeros_like(p.value)
        return out

    def check_config(self, cfg):
        expect = {
            "embedding": (cfg.num_features, cfg.embed_dim),
            "feat_w": (cfg.hidden, cfg.embed_dim),
            "enc1_w": (cfg.width, cfg.num_labels),
            "dec2_w": (cfg.num_labels, cfg.width),
        }
        for name, p in self.named_parameters():
            if name in expect and p.shape != expect[name]:
                raise ValueError(f"parameter {name} has shape {p.shape}, config implies {expect[name]}")


# ---------------------------------------------------------------------------
# the three mappings
# ---------------------------------------------------------------------------

def _feature_block(x):
    """Accept a SparseVector, a Dataset, or an (indptr, indices, values) triple."""
    if hasattr(x, "feat_indptr"):
        return x.feat_indptr, x.feat_indices, x.feat_values
    if hasattr(x, "indices") and hasattr(x, "values"):
        idx = np.asarray(x.indices, dtype=np.int64)
        return np.array([0, len(idx)], dtype=np.int64), idx, np.asarray(x.values)
    return x


def feature_forward(params, indptr, indices, values, use_attention=True):
    weighted = spatial_weight_batch(indptr, indices, values, params.embedding.value)
    pooled, att_cache = attention_forward(weighted, params.attention, use_attention)
    x_h = linear_forward(params.feat, pooled)
    return x_h, (pooled, att_cache)


def feature_backward(params, cache, grad_xh):
    pooled, att_cache = cache
    grad_pooled = linear_backward(params.feat, pooled, grad_xh)
    grad_rows, g1, g2 = attention_backward(grad_pooled, att_cache, params.attention)
    if g1 is not None:
        params.attention.f1.grad += g1
        params.attention.f2.grad += g2
    kernels.scatter_add_rows(params.embedding.grad, att_cache.weighted.indices, grad_rows)


def feature_embed(x, params, use_attention=True):
    """x_h = FC(x') for one SparseVector (vector) or a batch (matrix)."""
    single = hasattr(x, "indices") and not hasattr(x, "feat_indptr")
    x_h, _ = feature_forward(params, *_feature_block(x), use_attention=use_attention)
    return x_h[0] if single else x_h


def label_encode_forward(params, label_indptr, label_indices):
    L = params.enc1.in_dim
    label_indices = np.asarray(label_indices, dtype=np.int64)
    if len(label_indices) and (label_indices.min() < 0 or label_indices.max() >= L):
        raise ValueError(f"label index outside [0, {L})")
    # one-hot times W1 == sum of the positive labels' columns
    cols = params.enc1.weight.value.T[label_indices]
    pre1 = kernels.segment_sum(cols, label_indptr) + params.enc1.bias.value
    h1 = relu_forward(pre1)
    y_h = linear_forward(params.enc2, h1)
    return y_h, (label_indptr, label_indices, pre1, h1)


def label_encode_backward(params, cache, grad_yh):
    label_indptr, label_indices, pre1, h1 = cache
    grad_pre1 = relu_backward(pre1, linear_backward(params.enc2, h1, grad_yh))
    params.enc1.bias.grad += grad_pre1.sum(axis=0)
    rows = np.repeat(grad_pre1, np.diff(label_indptr), axis=0)
    kernels.scatter_add_rows(params.enc1.weight.grad.T, label_indices, rows)


def label_encode(y, params):
    """y_h for one LabelSet (vector) or for a Dataset's label block (matrix)."""
    if hasattr(y, "label_indptr"):
        return label_encode_forward(params, y.label_indptr, y.label_indices)[0]
    labels = np.asarray(y.labels, dtype=np.int64)
    return label_encode_forward(params, np.array([0, len(labels)]), labels)[0][0]


def decode_forward(params, z):
    pre1 = linear_forward(params.dec1, z)
    h1 = relu_forward(pre1)
    scores = sigmoid_forward(linear_forward(params.dec2, h1))
    return scores, (z, pre1, h1, scores)


def decode_backward(params, cache, grad_scores):
    z, pre1, h1, scores = cache
    grad_logits = scores * (1 - scores) * grad_scores
    grad_h1 = linear_backward(params.dec2, h1, grad_logits)
    return linear_backward(params.dec1, z, relu_backward(pre1, grad_h1))


def label_decode(z, params):
    z = np.asarray(z)
    if z.shape[-1] != params.dec1.in_dim:
        raise ValueError(f"decoder expects latent dim {params.dec1.in_dim}, got {z.shape[-1]}")
    return decode_forward(params, z)[0]


# ---------------------------------------------------------------------------
# objective
# ---------------------------------------------------------------------------

@dataclass
class ObjectiveResult:
    total: float
    l_h: float
    l_ae: float
    skipped: int
    caches: dict | None = None


def objective(params, batch, cfg, backward=True, detach_label_latent=False, keep_caches=False):
    """Mean joint loss of a minibatch; accumulates gradients when ``backward``.

    ``detach_label_latent`` stops the MSE gradient at y_h (diagnostics only).
    """
    B = len(batch)
    if B == 0:
        raise ValueError("empty minibatch")
    use_att = not cfg.no_attention
    dt = cfg.np_dtype
    values = batch.feat_values.astype(dt)

    x_h, f_cache = feature_forward(params, batch.feat_indptr, batch.feat_indices, values, use_att)
    y_h, e_cache = label_encode_forward(params, batch.label_indptr, batch.label_indices)
    scores, d_cache = decode_forward(params, y_h)

    l_h, grad_xh = mse_loss(x_h, y_h)
    counts = np.diff(batch.label_indptr)
    skipped = int(np.sum((counts == 0) | (counts == cfg.num_labels)))
    if cfg.loss == "rank":
        l_ae, grad_scores = rank_loss_batch(batch.label_indptr, batch.label_indices, scores, cfg.margin)
    else:
        l_ae, grad_scores = bce_rows(batch.label_matrix().astype(dt), scores)

    mean_h = float(np.mean(l_h))
    mean_ae = float(np.mean(l_ae))
    total = mean_h + cfg.lam * mean_ae

    if backward:
        grad_xh = (grad_xh / B).astype(dt, copy=False)
        grad_scores = (grad_scores * (cfg.lam / B)).astype(dt, copy=False)
        feature_backward(params, f_cache, grad_xh)
        grad_yh = decode_backward(params, d_cache, grad_scores)
        if not detach_label_latent:
            grad_yh = grad_yh - grad_xh
        label_encode_backward(params, e_cache, grad_yh)

    caches = None
    if keep_caches:
        caches = {"x_h": x_h, "y_h": y_h, "scores": scores,
                  "feature": f_cache, "encoder": e_cache, "decoder": d_cache}
    return ObjectiveResult(total, mean_h, mean_ae, skipped, caches)


# ---------------------------------------------------------------------------
# inference
# ---------------------------------------------------------------------------

def predict_scores(params, data, cfg, batch_size=1024):
    """Score matrix D(F(x)) for every instance of ``data`` (a Dataset)."""
    use_att = not cfg.no_attention
    dt = cfg.np_dtype
    out = np.empty((len(data), cfg.num_labels), dtype=dt)
    for start in range(0, len(data), batch_size):
        chunk = data.take(np.arange(start, min(start + batch_size, len(data))))
        x_h, _ = feature_forward(params, chunk.feat_indptr, chunk.feat_indices,
                                 chunk.feat_values.astype(dt), use_att)
        out[start:start + len(chunk)] = decode_forward(params, x_h)[0]
    return out


def top_k(scores, k):
    """Indices of the k largest scores, ties to the lower index."""
    scores = np.asarray(scores)
    order = np.argsort(-scores, axis=-1, kind="stable")
    return order[..., :k]


def predict(x, params, k, cfg, return_scores=False):
    """Ranked ``[(label, score), ...]`` of length k for one SparseVector."""
    if k < 1:
        raise ValueError("k must be >= 1")
    k = min(k, cfg.num_labels)
    x_h, _ = feature_forward(params, *_feature_block(x), use_attention=not cfg.no_attention)
    scores = decode_forward(params, x_h.astype(cfg.np_dtype, copy=False))[0][0]
    ranked = [(int(l), float(scores[l])) for l in top_k(scores, k)]
    return (ranked, scores) if return_scores else ranked


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

def _precision_at_1(params, data, cfg):
    from .metrics import precision_at_k_batch
    scores = predict_scores(params, data, cfg)
    return float(np.mean(precision_at_k_batch(data.label_indptr, data.label_indices, scores, 1)))


def train(dataset, valid, cfg, params=None, embedding=None, progress=None):
    """Minibatch Adam on the joint objective with best-validation selection.

    ``valid`` may be None, in which case the final epoch's parameters are
    returned and ``val_p1`` is NaN.  ``progress(record)`` is called after every
    epoch when given.
    """
    if dataset.num_features != cfg.num_features or dataset.num_labels != cfg.num_labels:
        raise ValueError(f"dataset dims (V={dataset.num_features}, L={dataset.num_labels}) "
                         f"do not match config (V={cfg.num_features}, L={cfg.num_labels})")
    if len(dataset) == 0:
        raise ValueError("empty training set")
    rng = np.random.default_rng(cfg.seed)
    if params is None:
        params = ModelParams.create(cfg, rng, embedding=embedding)
    params.check_config(cfg)
    opt = AdamState(params.parameters(), lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2,
                    eps=cfg.eps, weight_decay=cfg.weight_decay)
    report = TrainReport()
    best = params.copy()
    best_p1 = -math.inf
    N = len(dataset)

    for epoch in range(1, cfg.epochs + 1):
        t0 = time.perf_counter()
        order = rng.permutation(N)
        sum_h = sum_ae = sum_tot = 0.0
        skipped = 0
        for b, start in enumerate(range(0, N, cfg.batch_size)):
            batch = dataset.take(order[start:start + cfg.batch_size])
            params.zero_grad()
            res = objective(params, batch, cfg)
            if not math.isfinite(res.total):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {b} "
                                    f"(l_h={res.l_h}, l_ae={res.l_ae})")
            adam_step(opt)
            n = len(batch)
            sum_h += res.l_h * n
            sum_ae += res.l_ae * n
            sum_tot += res.total * n
            skipped += res.skipped
        if skipped:
            log.info("epoch %d: %d instances with empty positive or negative set", epoch, skipped)

        val_p1 = _precision_at_1(params, valid, cfg) if valid is not None and len(valid) else float("nan")
        rec = EpochRecord(epoch, sum_h / N, sum_ae / N, sum_tot / N, val_p1, time.perf_counter() - t0)
        report.epochs.append(rec)
        log.info("epoch %d  l_h=%.5f  l_ae=%.5f  total=%.5f  val_p1=%.4f  (%.2fs)",
                 epoch, rec.l_h, rec.l_ae, rec.total, rec.val_p1, rec.seconds)
        if progress is not None:
            progress(rec)

        if valid is None or not len(valid):
            best, report.best_epoch = params, epoch
        elif val_p1 > best_p1:
            best_p1 = val_p1
            best = params.copy()
            report.best_epoch = epoch

    if cfg.epochs == 0:
        best = params
    return best, report
