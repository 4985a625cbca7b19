import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rank_ae.data import (DataFormatError, Dataset, counts_to_tfidf, load_pretrained_embeddings,
                          parse_xml_repo, read_vocab, serialize_xml_repo, split_dataset)


def test_parse_two_instances():
    d = parse_xml_repo("2 5 3\n1,2 0:0.5 4:1.2\n0 2:1.0\n")
    assert d.shape == (2, 5, 3)
    x0, y0 = d[0]
    assert y0.labels.tolist() == [1, 2]
    assert x0.entries == [(0, 0.5), (4, 1.2)]
    x1, y1 = d[1]
    assert y1.labels.tolist() == [0]
    assert x1.entries == [(2, 1.0)]


def test_label_out_of_bounds_names_line():
    with pytest.raises(DataFormatError, match=r"label index 7 ≥ L=3 at line 2"):
        parse_xml_repo("1 2 3\n1,7 0:1.0\n")


def test_leading_space_means_no_labels():
    d = parse_xml_repo("1 2 2\n 0:3.0\n")
    x, y = d[0]
    assert len(y) == 0
    assert x.entries == [(0, 3.0)]


def test_features_sorted_on_ingest():
    d = parse_xml_repo("1 5 2\n0 4:1.0 1:2.0\n")
    assert d[0][0].indices.tolist() == [1, 4]


@pytest.mark.parametrize("text, pattern", [
    ("2 5\n0 1:1\n", "malformed header at line 1"),
    ("x 5 2\n0 1:1\n", "malformed header at line 1"),
    ("1 5 2\n0 1:1 1:2\n", "duplicate feature index 1 at line 2"),
    ("1 5 2\n0 1:abc\n", "non-numeric value .* at line 2"),
    ("1 5 2\n0 9:1\n", "feature index 9 ≥ V=5 at line 2"),
    ("2 5 2\n0 1:1\n", "declares N=2"),
    ("1 5 2\n0 1:1\n1 2:1\n", "more than N=1 instances at line 3"),
])
def test_parse_errors(text, pattern):
    with pytest.raises(DataFormatError, match=pattern):
        parse_xml_repo(text)


def test_one_based_indices():
    d = parse_xml_repo("1 3 2\n2 1:1.0 3:2.0\n", one_based=True)
    assert d[0][1].labels.tolist() == [1]
    assert d[0][0].indices.tolist() == [0, 2]


def test_empty_instance_round_trip():
    d = parse_xml_repo("2 3 2\n \n1 0:1.0\n")
    assert len(d[0][0]) == 0 and len(d[0][1]) == 0
    assert parse_xml_repo(serialize_xml_repo(d)) == d


def test_labels_without_features():
    d = parse_xml_repo("1 3 2\n0,1\n")
    assert d[0][1].labels.tolist() == [0, 1] and len(d[0][0]) == 0
    assert parse_xml_repo(serialize_xml_repo(d)) == d


@st.composite
def datasets(draw):
    V = draw(st.integers(1, 8))
    L = draw(st.integers(1, 6))
    n = draw(st.integers(0, 6))
    rows = []
    for _ in range(n):
        idx = draw(st.lists(st.integers(0, V - 1), unique=True, max_size=V))
        vals = draw(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=len(idx), max_size=len(idx)))
        labels = draw(st.lists(st.integers(0, L - 1), unique=True, max_size=L))
        rows.append((list(zip(idx, vals)), labels))
    return Dataset.from_rows(V, L, rows)


@settings(max_examples=150, deadline=None)
@given(datasets())
def test_round_trip_property(d):
    text = serialize_xml_repo(d)
    back = parse_xml_repo(text)
    assert back == d
    assert serialize_xml_repo(back) == text


def test_canonical_form_of_messy_text():
    messy = "2 6 3\n2,0   5:1.50  1:2\n1 3:1e-1\n"
    assert serialize_xml_repo(parse_xml_repo(messy)) == "2 6 3\n0,2 1:2.0 5:1.5\n1 3:0.1\n"


def _toy(n=10, seed=0):
    rng = np.random.default_rng(seed)
    rows = [([(int(j), float(rng.uniform(0.1, 1)))], [int(rng.integers(3))])
            for j in rng.integers(0, 4, size=n)]
    return Dataset.from_rows(4, 3, rows)


def test_split_sizes_and_determinism():
    d = _toy(10)
    a, b = split_dataset(d, 0.8, seed=3)
    assert (len(a), len(b)) == (8, 2)
    a2, b2 = split_dataset(d, 0.8, seed=3)
    assert a == a2 and b == b2


@pytest.mark.parametrize("seed", range(8))
def test_split_is_a_partition(seed):
    d = _toy(25, seed)
    a, b = split_dataset(d, 0.6, seed)
    key = lambda ds: sorted((tuple(x.entries), tuple(y.labels.tolist())) for x, y in ds)
    assert sorted(key(a) + key(b)) == key(d)


@pytest.mark.parametrize("fraction", [0.0, 1.0, -0.1, 1.5])
def test_split_rejects_bad_fraction(fraction):
    with pytest.raises(ValueError):
        split_dataset(_toy(), fraction, 0)


def test_tfidf_clamps_ubiquitous_feature():
    # feature 0 in both rows: idf = ln(2/3) < 0 -> 0, dropped
    d = Dataset.from_rows(3, 1, [([(0, 1.0), (1, 2.0)], [0]), ([(0, 3.0)], [0])])
    t = counts_to_tfidf(d)
    assert 0 not in t[0][0].indices.tolist()
    assert len(t[1][0]) == 0


def test_tfidf_rows_unit_or_empty():
    d = Dataset.from_rows(2, 1, [([(0, 5.0)], [0])])
    t = counts_to_tfidf(d)
    vals = t[0][0].values
    assert len(vals) == 0 or math.isclose(float(np.linalg.norm(vals)), 1.0)
    rng = np.random.default_rng(0)
    rows = [([(j, float(rng.integers(1, 5))) for j in sorted(rng.choice(30, 5, replace=False))], [0])
            for _ in range(40)]
    t = counts_to_tfidf(Dataset.from_rows(30, 1, rows))
    for x, _ in t:
        n = np.linalg.norm(x.values)
        assert len(x) == 0 or abs(n - 1) < 1e-12


def test_tfidf_rejects_negative():
    with pytest.raises(ValueError):
        counts_to_tfidf(Dataset.from_rows(2, 1, [([(0, -1.0)], [0])]))


def test_embeddings_copy_found_rows():
    table, found = load_pretrained_embeddings("apple 0.1 0.2\n", ["apple"], 2)
    np.testing.assert_allclose(table[0], [0.1, 0.2], rtol=1e-6)
    assert found == 1


def test_embeddings_fallback_random():
    table, found = load_pretrained_embeddings("apple 0.1 0.2\n", ["zzz"], 2, rng=np.random.default_rng(1))
    assert found == 0
    assert table.shape == (1, 2) and np.all(np.abs(table) <= math.sqrt(6 / 3) + 1e-6)


def test_embeddings_dimension_mismatch():
    with pytest.raises(DataFormatError, match="expected 2"):
        load_pretrained_embeddings("apple 0.1 0.2 0.3\n", ["apple"], 2)


def test_read_vocab():
    assert read_vocab(io.StringIO("a\nb\n")) == ["a", "b"]


def test_dataset_is_read_only():
    d = _toy()
    with pytest.raises(ValueError):
        d.feat_values[0] = 2.0
