"""Extreme-classification datasets: parsing, splitting, tf-idf, embeddings.

A dataset is held as two CSR blocks (features and labels) so that batches can
be handed straight to the kernels.  ``Dataset[i]`` materialises one instance
as ``(SparseVector, LabelSet)`` for callers that want the per-row view.
"""
import io
import math
from dataclasses import dataclass

import numpy as np

from .nncore import init_params


class DataFormatError(ValueError):
    """Malformed dataset, vocabulary or embedding file."""


@dataclass(frozen=True)
class SparseVector:
    indices: np.ndarray
    values: np.ndarray

    def __len__(self):
        return len(self.indices)

    @property
    def entries(self):
        return list(zip(self.indices.tolist(), self.values.tolist()))


@dataclass(frozen=True)
class LabelSet:
    labels: np.ndarray

    def __len__(self):
        return len(self.labels)

    def __contains__(self, item):
        return item in set(self.labels.tolist())

    def to_dense(self, num_labels):
        y = np.zeros(num_labels, dtype=bool)
        y[self.labels] = True
        return y


def _as_index(a):
    return np.ascontiguousarray(a, dtype=np.int64)


class Dataset:
    """Immutable multi-label dataset with N instances, V features, L labels."""

    def __init__(self, num_features, num_labels, feat_indptr, feat_indices, feat_values,
                 label_indptr, label_indices, validate=True):
        self.num_features = int(num_features)
        self.num_labels = int(num_labels)
        self.feat_indptr = _as_index(feat_indptr)
        self.feat_indices = _as_index(feat_indices)
        self.feat_values = np.ascontiguousarray(feat_values, dtype=np.float64)
        self.label_indptr = _as_index(label_indptr)
        self.label_indices = _as_index(label_indices)
        for arr in (self.feat_indptr, self.feat_indices, self.feat_values,
                    self.label_indptr, self.label_indices):
            arr.setflags(write=False)
        if validate:
            self._validate()

    def _validate(self):
        if len(self.feat_indptr) != len(self.label_indptr):
            raise ValueError("feature and label blocks disagree on N")
        if self.feat_indptr[-1] != len(self.feat_indices) or len(self.feat_indices) != len(self.feat_values):
            raise ValueError("inconsistent feature CSR arrays")
        if self.label_indptr[-1] != len(self.label_indices):
            raise ValueError("inconsistent label CSR arrays")
        if len(self.feat_indices) and (self.feat_indices.min() < 0 or self.feat_indices.max() >= self.num_features):
            raise ValueError(f"feature index outside [0, {self.num_features})")
        if len(self.label_indices) and (self.label_indices.min() < 0 or self.label_indices.max() >= self.num_labels):
            raise ValueError(f"label index outside [0, {self.num_labels})")
        if not np.all(np.isfinite(self.feat_values)):
            raise ValueError("non-finite feature value")
        for indptr, idx, what in ((self.feat_indptr, self.feat_indices, "feature"),
                                  (self.label_indptr, self.label_indices, "label")):
            step = np.diff(idx)
            # a non-increasing step is only allowed across row boundaries
            inner = np.ones(len(step), dtype=bool)
            bounds = indptr[1:-1] - 1
            bounds = bounds[(bounds >= 0) & (bounds < len(step))]
            inner[bounds] = False
            if np.any(step[inner] <= 0):
                raise ValueError(f"{what} indices must be strictly increasing within a row")

    # -- shape -----------------------------------------------------------

    @property
    def num_instances(self):
        return len(self.feat_indptr) - 1

    def __len__(self):
        return self.num_instances

    @property
    def shape(self):
        return self.num_instances, self.num_features, self.num_labels

    def __getitem__(self, i):
        a, b = self.feat_indptr[i], self.feat_indptr[i + 1]
        c, d = self.label_indptr[i], self.label_indptr[i + 1]
        return (SparseVector(self.feat_indices[a:b], self.feat_values[a:b]),
                LabelSet(self.label_indices[c:d]))

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.shape == other.shape
                and np.array_equal(self.feat_indptr, other.feat_indptr)
                and np.array_equal(self.feat_indices, other.feat_indices)
                and np.array_equal(self.feat_values, other.feat_values)
                and np.array_equal(self.label_indptr, other.label_indptr)
                and np.array_equal(self.label_indices, other.label_indices))

    def __repr__(self):
        N, V, L = self.shape
        return f"Dataset(N={N}, V={V}, L={L}, nnz={len(self.feat_indices)})"

    # -- constructors / views --------------------------------------------

    @classmethod
    def from_rows(cls, num_features, num_labels, rows):
        """Build from ``[(features, labels), ...]`` where features is a list of
        ``(index, value)`` pairs (any order) and labels an iterable of ints."""
        f_ptr, f_idx, f_val, l_ptr, l_idx = [0], [], [], [0], []
        for feats, labels in rows:
            feats = sorted((int(j), float(v)) for j, v in feats)
            f_idx.extend(j for j, _ in feats)
            f_val.extend(v for _, v in feats)
            f_ptr.append(len(f_idx))
            l_idx.extend(sorted(set(int(l) for l in labels)))
            l_ptr.append(len(l_idx))
        return cls(num_features, num_labels, f_ptr, f_idx, f_val, l_ptr, l_idx)

    def take(self, rows):
        """Sub-dataset of the given instance positions, in that order."""
        rows = _as_index(rows)
        f_ptr, f_sel = _ragged_take(self.feat_indptr, rows)
        l_ptr, l_sel = _ragged_take(self.label_indptr, rows)
        return Dataset(self.num_features, self.num_labels,
                       f_ptr, self.feat_indices[f_sel], self.feat_values[f_sel],
                       l_ptr, self.label_indices[l_sel], validate=False)

    def with_labels(self, label_indptr, label_indices):
        return Dataset(self.num_features, self.num_labels, self.feat_indptr, self.feat_indices,
                       self.feat_values, label_indptr, label_indices)

    def with_values(self, feat_indptr, feat_indices, feat_values):
        return Dataset(self.num_features, self.num_labels, feat_indptr, feat_indices,
                       feat_values, self.label_indptr, self.label_indices)

    def label_counts(self):
        return np.diff(self.label_indptr)

    def label_matrix(self):
        """Dense boolean N x L label matrix (small L only)."""
        Y = np.zeros((self.num_instances, self.num_labels), dtype=bool)
        rows = np.repeat(np.arange(self.num_instances), self.label_counts())
        Y[rows, self.label_indices] = True
        return Y


def _ragged_take(indptr, rows):
    lengths = indptr[rows + 1] - indptr[rows]
    new_ptr = np.zeros(len(rows) + 1, dtype=np.int64)
    np.cumsum(lengths, out=new_ptr[1:])
    # flat positions of every selected element
    offsets = np.repeat(indptr[rows] - new_ptr[:-1], lengths)
    sel = np.arange(new_ptr[-1], dtype=np.int64) + offsets
    return new_ptr, sel


# ---------------------------------------------------------------------------
# repository text format
# ---------------------------------------------------------------------------

def _parse_header(line, lineno):
    parts = line.split()
    if len(parts) != 3:
        raise DataFormatError(f"malformed header at line {lineno}: expected 'N V L', got {line.strip()!r}")
    try:
        n, v, l = (int(p) for p in parts)
    except ValueError:
        raise DataFormatError(f"malformed header at line {lineno}: non-integer field in {line.strip()!r}") from None
    if n < 0 or v < 1 or l < 1:
        raise DataFormatError(f"malformed header at line {lineno}: N={n} V={v} L={l}")
    return n, v, l


def _parse_features(tokens, V, lineno, shift):
    pairs = []
    for tok in tokens:
        key, sep, val = tok.partition(":")
        if not sep:
            raise DataFormatError(f"expected 'index:value', got {tok!r} at line {lineno}")
        try:
            j = int(key) - shift
        except ValueError:
            raise DataFormatError(f"non-integer feature index {key!r} at line {lineno}") from None
        try:
            v = float(val)
        except ValueError:
            raise DataFormatError(f"non-numeric value {val!r} at line {lineno}") from None
        if not math.isfinite(v):
            raise DataFormatError(f"non-finite value {val!r} at line {lineno}")
        if j < 0 or j >= V:
            raise DataFormatError(f"feature index {j} ≥ V={V} at line {lineno}" if j >= V
                                  else f"negative feature index {j} at line {lineno}")
        pairs.append((j, v))
    pairs.sort()
    for (a, _), (b, _) in zip(pairs, pairs[1:]):
        if a == b:
            raise DataFormatError(f"duplicate feature index {a} at line {lineno}")
    return pairs


def _parse_labels(token, L, lineno, shift):
    labels = set()
    for part in token.split(","):
        if not part:
            continue
        try:
            l = int(part) - shift
        except ValueError:
            raise DataFormatError(f"non-integer label {part!r} at line {lineno}") from None
        if l < 0 or l >= L:
            raise DataFormatError(f"label index {l} ≥ L={L} at line {lineno}" if l >= L
                                  else f"negative label index {l} at line {lineno}")
        labels.add(l)
    return sorted(labels)


def parse_feature_line(line, num_features, lineno=1, one_based=False):
    """Parse ``"f:v f:v ..."`` into a sorted list of pairs."""
    return _parse_features(line.split(), num_features, lineno, int(one_based))


def _split_line(line):
    """Return (label_token or None, feature tokens)."""
    if not line.strip():
        return None, []
    if line[0].isspace():
        return None, line.split()
    tokens = line.split()
    if ":" in tokens[0]:
        return None, tokens
    return tokens[0], tokens[1:]


def parse_xml_repo(stream, one_based=False):
    """Read a dataset in the extreme-classification repository format.

    First line ``N V L``; each following line ``l1,l2,... f:v f:v ...``, where a
    line starting with whitespace has no labels.  Errors carry the 1-based
    line number.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    shift = int(one_based)
    header = stream.readline()
    if not header:
        raise DataFormatError("malformed header at line 1: empty file")
    N, V, L = _parse_header(header, 1)

    rows = []
    lineno = 1
    for raw in stream:
        lineno += 1
        line = raw.rstrip("\r\n")
        if not line.strip() and len(rows) >= N:
            continue  # trailing blank lines
        if len(rows) >= N:
            raise DataFormatError(f"more than N={N} instances at line {lineno}")
        label_tok, feat_toks = _split_line(line)
        labels = _parse_labels(label_tok, L, lineno, shift) if label_tok is not None else []
        feats = _parse_features(feat_toks, V, lineno, shift)
        rows.append((feats, labels))
    if len(rows) != N:
        raise DataFormatError(f"header declares N={N} instances but file has {len(rows)}")
    return Dataset.from_rows(V, L, rows)


def read_dataset(path, one_based=False):
    with open(path, encoding="utf-8") as fh:
        return parse_xml_repo(fh, one_based=one_based)


def _fmt(v):
    return repr(float(v))


def serialize_xml_repo(d):
    """Canonical text form: sorted indices, single spaces, shortest float repr."""
    out = [f"{d.num_instances} {d.num_features} {d.num_labels}\n"]
    for x, y in d:
        feats = " ".join(f"{j}:{_fmt(v)}" for j, v in zip(x.indices.tolist(), x.values.tolist()))
        labels = ",".join(str(l) for l in y.labels.tolist())
        if feats:
            out.append(f"{labels} {feats}\n")
        else:
            out.append(f"{labels}\n" if labels else " \n")
    return "".join(out)


def write_dataset(d, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_xml_repo(d))


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------

def split_dataset(d, fraction, seed):
    """Seeded random partition; the first part gets ``round(fraction * N)``."""
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must lie in (0, 1), got {fraction}")
    if len(d) == 0:
        raise ValueError("cannot split an empty dataset")
    perm = np.random.default_rng(seed).permutation(len(d))
    n_first = int(round(fraction * len(d)))
    return d.take(np.sort(perm[:n_first])), d.take(np.sort(perm[n_first:]))


def counts_to_tfidf(d):
    """tf * ln(N / (1 + df)) with negative idf clamped to 0, then L2 rows."""
    if np.any(d.feat_values < 0):
        raise ValueError("counts_to_tfidf needs nonnegative feature values")
    N = d.num_instances
    nz = d.feat_values != 0
    df = np.bincount(d.feat_indices[nz], minlength=d.num_features)
    idf = np.maximum(np.log(N / (1.0 + df)), 0.0)
    vals = d.feat_values * idf[d.feat_indices]

    keep = vals != 0
    rows = np.repeat(np.arange(N), np.diff(d.feat_indptr))
    rows, idx, vals = rows[keep], d.feat_indices[keep], vals[keep]
    norms = np.sqrt(np.bincount(rows, weights=vals * vals, minlength=N))
    vals = vals / norms[rows]
    indptr = np.zeros(N + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=N), out=indptr[1:])
    return d.with_values(indptr, idx, vals)


# ---------------------------------------------------------------------------
# vocabulary and pretrained embeddings
# ---------------------------------------------------------------------------

def read_vocab(stream):
    """One token per line; line number (0-based) is the feature index."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    return [line.rstrip("\r\n").strip() for line in stream]


def load_pretrained_embeddings(stream, vocab, dim, rng=None, dtype=np.float32):
    """Build a ``len(vocab) x dim`` table from a GloVe-style text file.

    Tokens found in the file are copied; the rest keep the random
    initialisation.  Returns ``(table, coverage)`` with coverage the number of
    vocabulary rows that were filled from the file.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    if rng is None:
        rng = np.random.default_rng(0)
    table = init_params(rng, (len(vocab), dim)).astype(dtype)
    where = {}
    for i, tok in enumerate(vocab):
        where.setdefault(tok, []).append(i)
    found = np.zeros(len(vocab), dtype=bool)
    for lineno, line in enumerate(stream, start=1):
        parts = line.rstrip().split(" ")
        if not parts or parts[0] not in where:
            continue
        if len(parts) - 1 != dim:
            raise DataFormatError(
                f"embedding for {parts[0]!r} at line {lineno} has {len(parts) - 1} values, expected {dim}")
        try:
            vec = np.array([float(p) for p in parts[1:]], dtype=np.float64)
        except ValueError:
            raise DataFormatError(f"non-numeric embedding value at line {lineno}") from None
        if not np.all(np.isfinite(vec)):
            raise DataFormatError(f"non-finite embedding value at line {lineno}")
        for i in where[parts[0]]:
            table[i] = vec
            found[i] = True
    return table, int(found.sum())
