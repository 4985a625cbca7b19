"""Prepare Mediamill / Delicious from the extreme-classification repository
and run the desk-scale reproduction.

Download the repository archives by hand (they need a browser), unpack them,
then:

    python3 benchmarks/reproduce_xc.py prepare --raw ~/xc/Mediamill --name Mediamill --out ~/xcdata
    python3 benchmarks/reproduce_xc.py prepare --raw ~/xc/Delicious --name Delicious --out ~/xcdata
    RANK_AE_XC_DATA=~/xcdata pytest tests/test_acceptance.py -k c5 -v

``prepare`` reads ``<Name>_data.txt`` plus the ``*_trSplit.txt`` /
``*_tstSplit.txt`` index files (1-based, one column per split) and writes
``<out>/<Name>/train.txt`` and ``test.txt``.  ``run`` trains and evaluates
directly without pytest.
"""
import argparse
import glob
import os
import sys
import time

import numpy as np

from rank_ae import _accel
from rank_ae.data import counts_to_tfidf, read_dataset, split_dataset, write_dataset
from rank_ae.metrics import evaluate, metrics_from_scores
from rank_ae.model import ModelConfig, train
from rank_ae.synthetic import frequency_baseline_scores


def _one(pattern):
    hits = glob.glob(pattern)
    if len(hits) != 1:
        sys.exit(f"expected exactly one file matching {pattern}, found {hits}")
    return hits[0]


def prepare(raw, name, out, split):
    data = read_dataset(_one(os.path.join(raw, f"{name}_data.txt")))
    tr_idx = np.loadtxt(_one(os.path.join(raw, "*[tT]rSplit*")), dtype=np.int64, ndmin=2)[:, split] - 1
    te_idx = np.loadtxt(_one(os.path.join(raw, "*[tT]stSplit*")), dtype=np.int64, ndmin=2)[:, split] - 1
    dest = os.path.join(out, name)
    os.makedirs(dest, exist_ok=True)
    write_dataset(data.take(np.sort(tr_idx)), os.path.join(dest, "train.txt"))
    write_dataset(data.take(np.sort(te_idx)), os.path.join(dest, "test.txt"))
    print(f"{name}: {len(tr_idx)} train / {len(te_idx)} test, V={data.num_features}, L={data.num_labels} -> {dest}")


def run(root, name, epochs):
    _accel.set_threads(os.cpu_count())
    t0 = time.perf_counter()
    full = read_dataset(os.path.join(root, name, "train.txt"))
    test = read_dataset(os.path.join(root, name, "test.txt"))
    if name == "Delicious":
        full, test = counts_to_tfidf(full), counts_to_tfidf(test)
    fit, val = split_dataset(full, 0.8, 0)
    cfg = ModelConfig(full.num_features, full.num_labels, embed_dim=100, hidden=100, epochs=epochs)
    params, rep = train(fit, val, cfg, progress=lambda r: print(f"  epoch {r.epoch} val P@1 {r.val_p1:.4f}"))
    rpt = evaluate(params, test, cfg)
    base = metrics_from_scores(test, frequency_baseline_scores(full, len(test)), ks=[1]).p_at_k[0]
    print(rpt.to_table())
    print(f"frequency baseline P@1 {100 * base:.2f}; total {(time.perf_counter() - t0) / 60:.1f} min")


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    sub = ap.add_subparsers(dest="cmd", required=True)
    p = sub.add_parser("prepare")
    p.add_argument("--raw", required=True)
    p.add_argument("--name", required=True, choices=["Mediamill", "Delicious"])
    p.add_argument("--out", required=True)
    p.add_argument("--split", type=int, default=0)
    r = sub.add_parser("run")
    r.add_argument("--data", required=True, help="directory holding <Name>/train.txt and test.txt")
    r.add_argument("--name", required=True, choices=["Mediamill", "Delicious"])
    r.add_argument("--epochs", type=int, default=30)
    a = ap.parse_args()
    if a.cmd == "prepare":
        prepare(a.raw, a.name, a.out, a.split)
    else:
        run(a.data, a.name, a.epochs)
