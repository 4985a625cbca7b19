"""Flat ``key = value`` configuration files.

The same text form is embedded in checkpoints, so evaluate/predict never need
the original config file.
"""
import dataclasses

from .model import ModelConfig


class ConfigError(ValueError):
    pass


# file key -> ModelConfig attribute
MODEL_KEYS = {
    "num_features": "num_features",
    "num_labels": "num_labels",
    "embed_dim": "embed_dim",
    "hidden": "hidden",
    "reduction": "reduction",
    "lambda": "lam",
    "margin": "margin",
    "loss": "loss",
    "width": "width",
    "epochs": "epochs",
    "batch_size": "batch_size",
    "seed": "seed",
    "lr": "lr",
    "beta1": "beta1",
    "beta2": "beta2",
    "eps": "eps",
    "weight_decay": "weight_decay",
    "no_attention": "no_attention",
    "deterministic": "deterministic",
    "dtype": "dtype",
}

# run-level keys that are not part of the model
RUN_KEYS = {
    "train": str,
    "valid": str,
    "test": str,
    "vocab": str,
    "embeddings": str,
    "report": str,
    "tfidf": "bool",
    "one_based": "bool",
    "valid_fraction": float,
    "threads": int,
}

_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ModelConfig)}


def _to_bool(text, key):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {text!r}")


def _convert(key, attr_type, text):
    try:
        if attr_type in ("bool", bool):
            return _to_bool(text, key)
        if attr_type is int:
            return int(text)
        if attr_type is float:
            return float(text)
        if attr_type == (int | None):
            return None if text.strip().lower() in ("", "none") else int(text)
        return text
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r}") from None


def parse_kv(text, source="<config>"):
    """``key = value`` lines with ``#`` comments -> ordered dict of strings."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key = key.strip()
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def split_run_config(kv):
    """Separate model keys from run keys; unknown keys are an error."""
    model, run = {}, {}
    for key, text in kv.items():
        if key in MODEL_KEYS:
            attr = MODEL_KEYS[key]
            model[attr] = _convert(key, _FIELD_TYPES[attr], text)
        elif key in RUN_KEYS:
            run[key] = _convert(key, RUN_KEYS[key], text)
        else:
            raise ConfigError(f"unknown config key {key!r}")
    return model, run


def read_run_config(path):
    with open(path, encoding="utf-8") as fh:
        return split_run_config(parse_kv(fh.read(), source=path))


def model_config_to_text(cfg):
    lines = []
    for key, attr in MODEL_KEYS.items():
        v = getattr(cfg, attr)
        if isinstance(v, bool):
            v = "true" if v else "false"
        elif isinstance(v, float):
            v = repr(v)
        lines.append(f"{key} = {v}")
    return "\n".join(lines) + "\n"


def model_config_from_text(text):
    model, run = split_run_config(parse_kv(text, source="<checkpoint config>"))
    if run:
        raise ConfigError(f"unexpected run keys in model config: {sorted(run)}")
    try:
        return ModelConfig(**model)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
