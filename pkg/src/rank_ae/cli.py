"""``rank-ae`` command line: train, evaluate, predict, perturb, attention.

Exit codes: 0 ok, 2 usage/config, 3 data/dimension, 4 capability mismatch.
"""
import argparse
import io
import logging
import os
import sys

import numpy as np

from . import _accel
from .attention import attention_mass, channel_attention, spatial_weight
from .checkpoint import CheckpointError, atomic_write, load_checkpoint, save_checkpoint
from .config import ConfigError, read_run_config
from .data import (DataFormatError, counts_to_tfidf, load_pretrained_embeddings, parse_feature_line,
                   read_dataset, read_vocab, serialize_xml_repo, split_dataset)
from .metrics import evaluate
from .model import ModelConfig, TrainingError, predict_scores, top_k, train
from .noise import NoiseSpec, inject

log = logging.getLogger("rank_ae")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CAPABILITY = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _need_file(path, what):
    if path is None:
        raise CliError(f"missing {what} path", EXIT_USAGE)
    if not os.path.isfile(path):
        raise CliError(f"{what} file not found: {path}", EXIT_USAGE)
    return path


def _load_data(path, what, one_based=False, tfidf=False):
    _need_file(path, what)
    try:
        d = read_dataset(path, one_based=one_based)
    except DataFormatError as exc:
        raise CliError(f"{path}: {exc}", EXIT_DATA) from None
    return counts_to_tfidf(d) if tfidf else d


def _load_model(path):
    _need_file(path, "checkpoint")
    try:
        return load_checkpoint(path)
    except CheckpointError as exc:
        raise CliError(f"{path}: {exc}", EXIT_DATA) from None


def _check_dims(cfg, d, path):
    if d.num_features != cfg.num_features or d.num_labels != cfg.num_labels:
        raise CliError(f"{path}: dataset has V={d.num_features}, L={d.num_labels} but model expects "
                       f"V={cfg.num_features}, L={cfg.num_labels}", EXIT_DATA)


def _threads(args):
    n = args.threads
    if n is None and os.environ.get("RANK_AE_THREADS"):
        try:
            n = int(os.environ["RANK_AE_THREADS"])
        except ValueError:
            raise CliError("RANK_AE_THREADS must be an integer", EXIT_USAGE) from None
    if n is not None:
        _accel.set_threads(n)


def _write_text(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        atomic_write(path, text.encode("utf-8"))


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

# CLI flag dest -> ModelConfig attribute
_OVERRIDES = {
    "epochs": "epochs", "batch_size": "batch_size", "lr": "lr", "lam": "lam", "margin": "margin",
    "hidden": "hidden", "embed_dim": "embed_dim", "reduction": "reduction", "width": "width",
    "weight_decay": "weight_decay", "loss": "loss", "seed": "seed", "dtype": "dtype",
}


def cmd_train(args):
    model_kw, run = ({}, {})
    if args.config:
        _need_file(args.config, "config")
        try:
            model_kw, run = read_run_config(args.config)
        except ConfigError as exc:
            raise CliError(f"{args.config}: {exc}", EXIT_USAGE) from None
    for dest, attr in _OVERRIDES.items():
        v = getattr(args, dest, None)
        if v is not None:
            model_kw[attr] = v
    if args.no_attention:
        model_kw["no_attention"] = True
    if args.deterministic:
        model_kw["deterministic"] = True
    for key in ("num_features", "num_labels"):
        model_kw.pop(key, None)

    one_based = args.one_based or run.get("one_based", False)
    tfidf = args.tfidf or run.get("tfidf", False)
    train_path = args.data or run.get("train")
    valid_path = args.valid or run.get("valid")
    vocab_path = args.vocab or run.get("vocab")
    emb_path = args.embeddings or run.get("embeddings")
    fraction = args.valid_fraction if args.valid_fraction is not None else run.get("valid_fraction", 0.8)
    if args.out is None:
        raise CliError("--out is required", EXIT_USAGE)
    report_path = args.report or run.get("report") or os.path.join(
        os.path.dirname(os.path.abspath(args.out)), "report.csv")
    if emb_path and not vocab_path:
        raise CliError("--embeddings needs --vocab to map feature indices to tokens", EXIT_USAGE)

    full = _load_data(train_path, "training data", one_based, tfidf)
    if valid_path:
        fit, valid = full, _load_data(valid_path, "validation data", one_based, tfidf)
        if valid.shape[1:] != full.shape[1:]:
            raise CliError(f"{valid_path}: dims do not match training data", EXIT_DATA)
    else:
        try:
            fit, valid = split_dataset(full, fraction, model_kw.get("seed", 0))
        except ValueError as exc:
            raise CliError(str(exc), EXIT_USAGE) from None

    try:
        cfg = ModelConfig(full.num_features, full.num_labels, **model_kw)
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid configuration: {exc}", EXIT_USAGE) from None
    _threads(args)

    embedding = None
    if emb_path:
        vocab = read_vocab(open(_need_file(vocab_path, "vocabulary"), encoding="utf-8"))
        if len(vocab) != cfg.num_features:
            raise CliError(f"{vocab_path}: {len(vocab)} tokens but data has V={cfg.num_features}", EXIT_DATA)
        try:
            with open(_need_file(emb_path, "embeddings"), encoding="utf-8") as fh:
                embedding, found = load_pretrained_embeddings(
                    fh, vocab, cfg.embed_dim, np.random.default_rng(cfg.seed), cfg.np_dtype)
        except DataFormatError as exc:
            raise CliError(f"{emb_path}: {exc}", EXIT_DATA) from None
        log.info("pretrained embeddings cover %d / %d features", found, len(vocab))

    try:
        params, report = train(fit, valid, cfg, embedding=embedding)
        if args.refit and report.best_epoch > 0:
            # select the epoch count on validation, then fit on everything
            refit_cfg = cfg.replace(epochs=report.best_epoch)
            params, _ = train(full if not valid_path else fit, None, refit_cfg, embedding=embedding)
    except TrainingError as exc:
        raise CliError(str(exc), EXIT_DATA) from None

    save_checkpoint(args.out, params, cfg)
    _write_text(report_path, report.to_csv())
    print(f"best epoch {report.best_epoch}, validation P@1 {report.best_val_p1:.4f}; "
          f"wrote {args.out} and {report_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# evaluate / predict
# ---------------------------------------------------------------------------

def _parse_ks(values):
    if not values:
        return [1, 3, 5]
    ks = []
    for v in values:
        for part in str(v).split(","):
            if part.strip():
                try:
                    ks.append(int(part))
                except ValueError:
                    raise CliError(f"bad --k value {part!r}", EXIT_USAGE) from None
    if any(k < 1 for k in ks):
        raise CliError("--k values must be >= 1", EXIT_USAGE)
    return sorted(set(ks))


def cmd_evaluate(args):
    params, cfg = _load_model(args.model)
    test = _load_data(args.data, "test data", args.one_based, args.tfidf)
    _check_dims(cfg, test, args.data)
    ks = _parse_ks(args.k)
    if max(ks) > cfg.num_labels:
        raise CliError(f"k={max(ks)} exceeds L={cfg.num_labels}", EXIT_USAGE)
    _threads(args)
    report = evaluate(params, test, cfg, ks)
    print(report.to_table())
    if args.csv:
        _write_text(args.csv, report.to_csv())
    return EXIT_OK


def _read_feature_lines(path, V, one_based):
    """Feature-only lines, or a full dataset file (labels ignored)."""
    with open(_need_file(path, "input"), encoding="utf-8") as fh:
        text = fh.read()
    lines = text.splitlines()
    first = lines[0].split() if lines else []
    if len(first) == 3 and all(t.isdigit() for t in first):
        from .data import parse_xml_repo
        d = parse_xml_repo(io.StringIO(text), one_based=one_based)
        if d.num_features != V:
            raise DataFormatError(f"input declares V={d.num_features}, model expects V={V}")
        return d
    from .data import Dataset
    rows = []
    for lineno, line in enumerate(lines, start=1):
        toks = line.split()
        if toks and ":" not in toks[0] and not line[:1].isspace():
            toks = toks[1:]  # leading label field
        rows.append((parse_feature_line(" ".join(toks), V, lineno, one_based), []))
    return Dataset.from_rows(V, 1, rows)


def cmd_predict(args):
    params, cfg = _load_model(args.model)
    if args.k < 1:
        raise CliError("--k must be >= 1", EXIT_USAGE)
    try:
        data = _read_feature_lines(args.input, cfg.num_features, args.one_based)
    except DataFormatError as exc:
        raise CliError(f"{args.input}: {exc}", EXIT_DATA) from None
    _threads(args)
    # labels are irrelevant for scoring; reuse the feature block only
    from .data import Dataset
    feats = Dataset(cfg.num_features, cfg.num_labels, data.feat_indptr, data.feat_indices, data.feat_values,
                    np.zeros(len(data) + 1, dtype=np.int64), [], validate=False)
    scores = predict_scores(params, feats, cfg)
    k = min(args.k, cfg.num_labels)
    out = []
    for row in scores:
        out.append(" ".join(f"{int(l)}:{float(row[l]):.6g}" for l in top_k(row, k)))
    _write_text(args.out, "\n".join(out) + ("\n" if out else ""))
    return EXIT_OK


# ---------------------------------------------------------------------------
# perturb
# ---------------------------------------------------------------------------

def cmd_perturb(args):
    try:
        spec = NoiseSpec(args.mode, args.rate, args.seed)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_USAGE) from None
    if args.out is None:
        raise CliError("--out is required", EXIT_USAGE)
    d = _load_data(args.data, "data", args.one_based)
    if args.valid_out:
        try:
            portion, valid = split_dataset(d, args.valid_fraction, args.seed)
        except ValueError as exc:
            raise CliError(str(exc), EXIT_USAGE) from None
    else:
        portion, valid = d, None
    noisy, stats = inject(portion, spec, return_stats=True)
    _write_text(args.out, serialize_xml_repo(noisy))
    if valid is not None:
        _write_text(args.valid_out, serialize_xml_repo(valid))
    print(f"mode={spec.mode} rate={spec.rate} seed={spec.seed} instances={len(noisy)} {stats.summary()}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# attention export
# ---------------------------------------------------------------------------

def cmd_attention(args):
    params, cfg = _load_model(args.model)
    if cfg.no_attention:
        raise CliError("checkpoint was trained with no_attention; it has no channel attention to export",
                       EXIT_CAPABILITY)
    d = _load_data(args.data, "data", args.one_based, args.tfidf)
    if d.num_features != cfg.num_features:
        raise CliError(f"{args.data}: V={d.num_features} but model expects V={cfg.num_features}", EXIT_DATA)
    vocab = None
    if args.vocab:
        vocab = read_vocab(open(_need_file(args.vocab, "vocabulary"), encoding="utf-8"))
        if len(vocab) != cfg.num_features:
            raise CliError(f"{args.vocab}: {len(vocab)} tokens but model has V={cfg.num_features}", EXIT_DATA)
    if args.top < 1:
        raise CliError("--top must be >= 1", EXIT_USAGE)
    E = params.embedding.value
    lines = ["instance_id,feature_index,token,mass"]
    for i, (x, _) in enumerate(d):
        if len(x) == 0:
            continue
        w = spatial_weight(x, E)
        A = channel_attention(w, params.attention)
        for j, mass in attention_mass(A, w.indices)[: args.top]:
            token = vocab[j] if vocab else ""
            if any(c in token for c in ',"\n'):
                token = '"' + token.replace('"', '""') + '"'
            lines.append(f"{i},{j},{token},{mass!r}")
    _write_text(args.out, "\n".join(lines) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="rank-ae", description="Ranking autoencoder for extreme multi-label data")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--threads", type=int, help="worker threads (default: $RANK_AE_THREADS or all cores)")
        sp.add_argument("--one-based", action="store_true", help="indices in input files start at 1")

    t = sub.add_parser("train", help="train a model and write a checkpoint")
    common(t)
    t.add_argument("--data", help="training set (repository format)")
    t.add_argument("--valid", help="validation set; default: split off the training set")
    t.add_argument("--valid-fraction", type=float, help="training share when splitting (default 0.8)")
    t.add_argument("--config", help="key = value config file")
    t.add_argument("--out", help="checkpoint path")
    t.add_argument("--report", help="per-epoch CSV (default: report.csv next to --out)")
    t.add_argument("--vocab", help="vocabulary file, one token per feature")
    t.add_argument("--embeddings", help="pretrained word vectors (needs --vocab)")
    t.add_argument("--tfidf", action="store_true", help="convert raw counts to tf-idf first")
    t.add_argument("--refit", action="store_true",
                   help="after picking the best epoch on validation, retrain on all training data")
    t.add_argument("--no-attention", action="store_true", help="skip channel attention (ablation)")
    t.add_argument("--deterministic", action="store_true")
    t.add_argument("--loss", choices=["rank", "bce"])
    t.add_argument("--seed", type=int)
    t.add_argument("--epochs", type=int)
    t.add_argument("--batch-size", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--lambda", dest="lam", type=float)
    t.add_argument("--margin", type=float)
    t.add_argument("--hidden", type=int)
    t.add_argument("--embed-dim", type=int)
    t.add_argument("--reduction", type=int)
    t.add_argument("--width", type=int)
    t.add_argument("--weight-decay", type=float)
    t.add_argument("--dtype", choices=["float32", "float64"])
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="P@k and nDCG@k on a labelled set")
    common(e)
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--k", action="append", help="cutoffs, repeatable or comma separated (default 1,3,5)")
    e.add_argument("--csv", help="also write metric,k,value CSV here")
    e.add_argument("--tfidf", action="store_true")
    e.set_defaults(func=cmd_evaluate)

    pr = sub.add_parser("predict", help="top-k labels per input line")
    common(pr)
    pr.add_argument("--model", required=True)
    pr.add_argument("--input", required=True, help="lines of f:v pairs, or a dataset file")
    pr.add_argument("--k", type=int, default=5)
    pr.add_argument("--out", help="output path (default stdout)")
    pr.set_defaults(func=cmd_predict)

    n = sub.add_parser("perturb", help="corrupt training labels")
    common(n)
    n.add_argument("--data", required=True)
    n.add_argument("--mode", required=True, help="missing or flip")
    n.add_argument("--rate", type=float, required=True)
    n.add_argument("--seed", type=int, default=0)
    n.add_argument("--out", required=True)
    n.add_argument("--valid-out", help="split first; write the clean validation part here")
    n.add_argument("--valid-fraction", type=float, default=0.8, help="training share of the split")
    n.set_defaults(func=cmd_perturb)

    a = sub.add_parser("attention", help="export per-feature attention mass")
    common(a)
    a.add_argument("--model", required=True)
    a.add_argument("--data", required=True)
    a.add_argument("--vocab")
    a.add_argument("--top", type=int, default=10)
    a.add_argument("--out", help="CSV path (default stdout)")
    a.add_argument("--tfidf", action="store_true")
    a.set_defaults(func=cmd_attention)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"rank-ae {args.command}: error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
