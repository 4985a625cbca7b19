"""The numba kernels and their numpy fallbacks must agree."""
import os
import subprocess
import sys

import numpy as np
import pytest

from rank_ae import _accel, kernels

pytestmark = pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba not installed")


def _labels(rng, B, L):
    sets = [np.sort(rng.choice(L, size=int(rng.integers(0, L + 1)), replace=False)) for _ in range(B)]
    indptr = np.cumsum([0] + [len(s) for s in sets]).astype(np.int64)
    return indptr, np.concatenate(sets).astype(np.int64)


@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_rank_loss_backends_agree(dtype):
    rng = np.random.default_rng(0)
    indptr, idx = _labels(rng, 64, 17)
    S = rng.random((64, 17)).astype(dtype)
    S[3, :5] = 0.5  # ties
    a = kernels.rank_loss_rows_numpy(indptr, idx, S, 0.4)
    b = kernels.rank_loss_rows_numba(indptr, idx, S, 0.4)
    np.testing.assert_allclose(a[0], b[0], rtol=1e-12, atol=1e-12)
    np.testing.assert_array_equal(a[1], b[1])
    assert a[1].dtype == b[1].dtype == dtype


def test_segment_sum_backends_agree():
    rng = np.random.default_rng(1)
    indptr = np.array([0, 3, 3, 7, 8, 8], dtype=np.int64)
    rows = rng.normal(size=(8, 5))
    np.testing.assert_allclose(kernels.segment_sum_numpy(rows, indptr), kernels.segment_sum_numba(rows, indptr),
                               rtol=1e-12)
    assert not kernels.segment_sum_numba(rows, indptr)[1].any()


def test_scatter_add_backends_agree():
    rng = np.random.default_rng(2)
    idx = rng.integers(0, 6, size=40)
    rows = rng.normal(size=(40, 3))
    a, b = np.zeros((6, 3)), np.zeros((6, 3))
    kernels.scatter_add_rows_numpy(a, idx, rows)
    kernels.scatter_add_rows_numba(b, idx, rows)
    np.testing.assert_allclose(a, b, rtol=1e-12)


def test_env_flag_selects_numpy():
    code = "from rank_ae import _accel, kernels; print(_accel.backend_name(), kernels.rank_loss_rows.__name__)"
    env = dict(os.environ, RANK_AE_NUMBA="0")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["numpy", "rank_loss_rows_numpy"]
