"""Backend switch for the hot kernels.

``RANK_AE_NUMBA=0`` forces the pure-numpy path; anything else uses numba when
it can be imported.  Both paths are always importable so tests can compare them.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

HAVE_NUMBA = numba is not None

if HAVE_NUMBA and "NUMBA_THREADING_LAYER" not in os.environ:
    # an outdated system TBB only produces a warning before numba falls back
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
USE_NUMBA = HAVE_NUMBA and os.environ.get("RANK_AE_NUMBA", "1").strip() not in ("0", "false", "no")


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise a no-op decorator."""
    if HAVE_NUMBA:
        return numba.njit(*args, **kwargs)

    def wrap(fn):
        return fn

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return wrap


# numba only recognises its own prange object inside jitted code
prange = numba.prange if HAVE_NUMBA else range


def set_threads(n):
    """Cap numba's worker pool; returns the count actually in effect."""
    if not HAVE_NUMBA or n is None:
        return None
    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
    return n


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
