"""Compare the numba kernels with their numpy fallbacks, plus one training epoch.

    python3 benchmarks/bench_kernels.py [--batch 512] [--labels 1000] [--repeat 20]

The epoch timing runs in a subprocess per backend, because the backend is
chosen once at import time from RANK_AE_NUMBA.
"""
import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from rank_ae import _accel, kernels


def best_of(fn, repeat):
    fn()  # warm-up, includes numba compilation
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def kernel_table(B, L, repeat):
    rng = np.random.default_rng(0)
    card = rng.integers(1, 8, size=B)
    indptr = np.concatenate([[0], np.cumsum(card)]).astype(np.int64)
    labels = np.concatenate([np.sort(rng.choice(L, c, replace=False)) for c in card]).astype(np.int64)
    scores = rng.random((B, L)).astype(np.float32)
    rows = rng.normal(size=(int(indptr[-1]), 128)).astype(np.float32)
    targets = rng.integers(0, 5000, size=len(rows))
    table = np.zeros((5000, 128), dtype=np.float32)

    cases = {
        "rank_loss_rows": (lambda: kernels.rank_loss_rows_numpy(indptr, labels, scores, 0.6),
                           lambda: kernels.rank_loss_rows_numba(indptr, labels, scores, 0.6)),
        "segment_sum": (lambda: kernels.segment_sum_numpy(rows, indptr),
                        lambda: kernels.segment_sum_numba(rows, indptr)),
        "scatter_add_rows": (lambda: kernels.scatter_add_rows_numpy(table, targets, rows),
                             lambda: kernels.scatter_add_rows_numba(table, targets, rows)),
    }
    print(f"kernels: batch {B}, L {L}, {_accel.numba.get_num_threads() if _accel.HAVE_NUMBA else 1} threads")
    print(f"{'kernel':<18}{'numpy ms':>10}{'numba ms':>10}{'speedup':>9}")
    for name, (np_fn, nb_fn) in cases.items():
        a, b = best_of(np_fn, repeat), best_of(nb_fn, repeat)
        print(f"{name:<18}{1e3 * a:>10.3f}{1e3 * b:>10.3f}{a / b:>8.1f}x")


EPOCH_SNIPPET = """
import json, time
from rank_ae import _accel
from rank_ae.model import ModelConfig, train
from rank_ae.synthetic import make_topk_dataset
tr, _, _ = make_topk_dataset(4000, 1, 2000, 500, k=3, min_active=10, max_active=40, separation=0.0, seed=0)
cfg = ModelConfig(tr.num_features, tr.num_labels, epochs=1, batch_size=128)
train(tr.take(range(256)), None, cfg)  # warm-up
t0 = time.perf_counter()
train(tr, None, cfg)
print(json.dumps({"backend": _accel.backend_name(), "seconds": time.perf_counter() - t0}))
"""


def epoch_timing():
    print("\none epoch, N=4000, V=2000, L=500, C=h=100")
    for flag in ("0", "1"):
        env = dict(os.environ, RANK_AE_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", EPOCH_SNIPPET], env=env, capture_output=True, text=True,
                             check=True)
        res = json.loads(out.stdout.strip().splitlines()[-1])
        print(f"  {res['backend']:<6} {res['seconds']:.2f}s")


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--batch", type=int, default=512)
    ap.add_argument("--labels", type=int, default=1000)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--skip-epoch", action="store_true")
    a = ap.parse_args()
    kernel_table(a.batch, a.labels, a.repeat)
    if not a.skip_epoch:
        epoch_timing()
