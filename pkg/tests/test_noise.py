import numpy as np
import pytest

from rank_ae.data import Dataset
from rank_ae.noise import NoiseSpec, inject, inject_flip, inject_missing
from rank_ae.synthetic import make_imdb_like


@pytest.fixture(scope="module")
def data():
    return make_imdb_like(n_train=6000, n_test=1, seed=4)[0]


def test_spec_validation():
    with pytest.raises(ValueError):
        NoiseSpec("swap", 0.1)
    with pytest.raises(ValueError):
        NoiseSpec("missing", 1.2)


def test_missing_rate_zero_and_one(data):
    assert inject_missing(data, NoiseSpec("missing", 0.0)) == data
    assert len(inject_missing(data, NoiseSpec("missing", 1.0)).label_indices) == 0


def test_missing_fraction_concentrates(data):
    assert len(data.label_indices) >= 10_000
    out, st = inject_missing(data, NoiseSpec("missing", 0.4, seed=1), return_stats=True)
    assert abs(st.removed / st.positives_before - 0.4) < 0.02
    assert st.added == 0 and st.positives_after == len(out.label_indices)


def test_missing_subset_and_features_untouched(data):
    out = inject_missing(data, NoiseSpec("missing", 0.3, seed=2))
    for (x0, y0), (x1, y1) in zip(data, out):
        assert set(y1.labels.tolist()) <= set(y0.labels.tolist())
    assert np.array_equal(out.feat_values, data.feat_values) and np.array_equal(out.feat_indices, data.feat_indices)


def test_same_seed_same_output(data):
    spec = NoiseSpec("flip", 0.05, seed=3)
    assert inject(data, spec) == inject(data, spec)
    assert inject(data, NoiseSpec("missing", 0.2, 3)) == inject(data, NoiseSpec("missing", 0.2, 3))


def test_flip_zero_and_one(data):
    small = data.take(np.arange(200))
    assert inject_flip(small, NoiseSpec("flip", 0.0)) == small
    with pytest.warns(RuntimeWarning):
        comp = inject_flip(small, NoiseSpec("flip", 1.0))
    assert np.array_equal(comp.label_matrix(), ~small.label_matrix())


def test_flip_added_expectation(data):
    d = data.take(np.arange(2000))
    out, st = inject_flip(d, NoiseSpec("flip", 0.1, seed=5), return_stats=True)
    expect = 0.1 * (28 - d.label_counts()).mean()
    assert abs(st.added / len(d) - expect) < 0.05 * expect


def test_flip_warns_when_noise_dominates():
    d = Dataset.from_rows(1, 100, [([(0, 1.0)], [0])] * 5)
    with pytest.warns(RuntimeWarning, match="noise dominates"):
        inject_flip(d, NoiseSpec("flip", 0.5))


def test_mode_mismatch():
    d = Dataset.from_rows(1, 2, [([(0, 1.0)], [0])])
    with pytest.raises(ValueError):
        inject_missing(d, NoiseSpec("flip", 0.1))
