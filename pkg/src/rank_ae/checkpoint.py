"""Binary model checkpoints.

Layout (all integers little-endian)::

    b"RKAE"                          magic
    u32  version                     currently 1
    u32  n, n bytes                  ModelConfig as UTF-8 ``key = value`` text
    then for each name in model.PARAM_ORDER:
        u32  m, m bytes              parameter name (UTF-8)
        u64  count                   number of elements
        count * f32                  row-major values

Writes go to a temporary file that is renamed into place.
"""
import os
import struct
import tempfile

import numpy as np

from .config import ConfigError, model_config_from_text, model_config_to_text
from .model import PARAM_ORDER, ModelParams

MAGIC = b"RKAE"
VERSION = 1


class CheckpointError(ValueError):
    pass


def checkpoint_bytes(params, cfg):
    arrays = params.arrays()
    chunks = [MAGIC, struct.pack("<I", VERSION)]
    text = model_config_to_text(cfg).encode("utf-8")
    chunks += [struct.pack("<I", len(text)), text]
    for name in PARAM_ORDER:
        data = np.ascontiguousarray(arrays[name], dtype="<f4")
        raw = name.encode("utf-8")
        chunks += [struct.pack("<I", len(raw)), raw, struct.pack("<Q", data.size), data.tobytes()]
    return b"".join(chunks)


def atomic_write(path, payload):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_checkpoint(path, params, cfg):
    atomic_write(path, checkpoint_bytes(params, cfg))


class _Reader:
    def __init__(self, buf):
        self.buf = buf
        self.pos = 0

    def take(self, n, what):
        if self.pos + n > len(self.buf):
            raise CheckpointError(f"truncated checkpoint: need {n} bytes for {what} at offset {self.pos}, "
                                  f"only {len(self.buf) - self.pos} left")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt, what):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))[0]


def _expected_shapes(cfg):
    V, L, C, h, g = cfg.num_features, cfg.num_labels, cfg.embed_dim, cfg.hidden, cfg.width
    k = C // cfg.reduction
    return {
        "embedding": (V, C), "att_f1": (k, C), "att_f2": (C, k),
        "feat_w": (h, C), "feat_b": (h,),
        "enc1_w": (g, L), "enc1_b": (g,), "enc2_w": (h, g), "enc2_b": (h,),
        "dec1_w": (g, h), "dec1_b": (g,), "dec2_w": (L, g), "dec2_b": (L,),
    }


def parse_checkpoint(buf):
    r = _Reader(buf)
    magic = r.take(4, "magic")
    if magic != MAGIC:
        raise CheckpointError("not a Rank-AE checkpoint (bad magic at offset 0)")
    version = r.unpack("<I", "version")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} at offset 4 (expected {VERSION})")
    n = r.unpack("<I", "config length")
    try:
        cfg = model_config_from_text(r.take(n, "config").decode("utf-8"))
    except (UnicodeDecodeError, ConfigError, ValueError) as exc:
        raise CheckpointError(f"bad config block at offset 12: {exc}") from None

    shapes = _expected_shapes(cfg)
    arrays = {}
    for name in PARAM_ORDER:
        at = r.pos
        m = r.unpack("<I", f"name length of {name}")
        got = r.take(m, f"name of {name}").decode("utf-8", errors="replace")
        if got != name:
            raise CheckpointError(f"expected parameter {name!r} at offset {at}, found {got!r}")
        count = r.unpack("<Q", f"element count of {name}")
        shape = shapes[name]
        if count != int(np.prod(shape)):
            raise CheckpointError(f"parameter {name} at offset {at} has {count} elements, config implies {shape}")
        data = np.frombuffer(r.take(4 * count, f"data of {name}"), dtype="<f4")
        arrays[name] = data.astype(np.float32).reshape(shape)
    if r.pos != len(buf):
        raise CheckpointError(f"trailing bytes after offset {r.pos}")

    template = ModelParams.create(cfg.replace(dtype="float32"), np.random.default_rng(0))
    for name, p in template.named_parameters():
        p.value = arrays[name].copy()
        p.grad = np.zeros_like(p.value)
    params = template if cfg.dtype == "float32" else template.astype(cfg.np_dtype)
    return params, cfg


def load_checkpoint(path):
    with open(path, "rb") as fh:
        return parse_checkpoint(fh.read())
