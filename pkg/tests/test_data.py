import gzip
import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from asyncsvrg.data import (ParseError, dataset_stats, generate_synthetic,
                            parse_libsvm, parse_synthetic_descriptor,
                            serialize_libsvm, synthetic_descriptor)
from asyncsvrg.model import Dataset, SparseExample

finite_vals = st.floats(allow_nan=False, allow_infinity=False,
                        min_value=-1e12, max_value=1e12)


@st.composite
def datasets(draw):
    n = draw(st.integers(1, 8))
    d = draw(st.integers(1, 12))
    examples = []
    for _ in range(n):
        nnz = draw(st.integers(0, d))
        idx = np.sort(np.asarray(
            draw(st.lists(st.integers(0, d - 1), min_size=nnz, max_size=nnz,
                          unique=True)), dtype=np.int64))
        vals = np.asarray(draw(st.lists(finite_vals, min_size=nnz, max_size=nnz)))
        examples.append(SparseExample(idx, vals, draw(st.sampled_from([1, -1]))))
    return Dataset.from_examples(examples, dim=d)


@given(datasets())
@settings(max_examples=60, deadline=None)
def test_libsvm_round_trip_property(data):
    buf = io.StringIO()
    serialize_libsvm(data, buf)
    back = parse_libsvm(io.StringIO(buf.getvalue()), dim=data.dim)
    assert np.array_equal(back.indptr, data.indptr)
    assert np.array_equal(back.col_indices, data.col_indices)
    assert np.array_equal(back.values, data.values)
    assert np.array_equal(back.labels, data.labels)
    assert back.dim == data.dim


def test_parse_labels_and_indices():
    data = parse_libsvm(io.StringIO("+1 1:0.5 3:2.0\n-1 2:1.0\n1 1:1.0\n"))
    assert data.n == 3 and data.dim == 3
    assert np.array_equal(data.labels, [1.0, -1.0, 1.0])
    assert np.array_equal(data.col_indices, [0, 2, 1, 0])  # 1-based -> 0-based


@pytest.mark.parametrize("text,line,fragment", [
    ("+1 1:1.0\n0 1:1.0\n", 2, "label"),
    ("+1 1:1.0\n-1 notafeature\n", 2, "malformed"),
    ("+1 3:1.0 2:1.0\n", 1, "increasing"),
    ("+1 0:1.0\n", 1, "increasing"),
    ("+1 1:abc\n", 1, "malformed"),
    ("", 0, "empty"),
])
def test_parse_errors_carry_line_numbers(text, line, fragment):
    with pytest.raises(ParseError) as err:
        parse_libsvm(io.StringIO(text))
    assert err.value.line == line
    assert fragment in err.value.reason


def test_parse_gzip(tmp_path):
    path = tmp_path / "tiny.txt.gz"
    with gzip.open(path, "wt") as f:
        f.write("+1 1:1.0 2:-2.5\n-1 2:0.25\n")
    data = parse_libsvm(path)
    assert data.n == 2 and data.dim == 2
    assert data.values.tolist() == [1.0, -2.5, 0.25]


def test_dim_pinning():
    data = parse_libsvm(io.StringIO("+1 2:1.0\n"), dim=10)
    assert data.dim == 10
    with pytest.raises(ParseError):
        parse_libsvm(io.StringIO("+1 20:1.0\n"), dim=10)


def test_generate_synthetic_is_deterministic_and_normalized():
    a = generate_synthetic(30, 5, seed=7)
    b = generate_synthetic(30, 5, seed=7)
    c = generate_synthetic(30, 5, seed=8)
    assert a.content_hash() == b.content_hash()
    assert a.content_hash() != c.content_hash()
    norms = np.linalg.norm(a.matrix.toarray(), axis=1)
    assert np.allclose(norms, 1.0, atol=1e-12)
    assert set(np.unique(a.labels)) <= {1.0, -1.0}


def test_generate_synthetic_noise_free_separation():
    data = generate_synthetic(100, 8, seed=5, separation=np.inf)
    # the planted direction must classify every row correctly; recover it by
    # regenerating the same stream
    rng = np.random.default_rng([5, 100, 8])
    planted = rng.standard_normal(8)
    planted /= np.linalg.norm(planted)
    margins = data.matrix.toarray() @ planted
    assert np.all(np.sign(margins) * data.labels >= 0)


def test_synthetic_descriptor_round_trip():
    text = synthetic_descriptor(40, 6, 11, 2.5)
    data = parse_synthetic_descriptor(text)
    assert data.content_hash() == generate_synthetic(40, 6, 11, 2.5).content_hash()
    with pytest.raises(ValueError):
        parse_synthetic_descriptor("kind=other\n")


def test_dataset_stats(small_data):
    meta = dataset_stats(small_data, "fixture")
    assert (meta.n, meta.d) == (small_data.n, small_data.dim)
    assert meta.nnz == small_data.nnz
    assert meta.source == "fixture"
    assert meta.max_row_sq_norm == pytest.approx(1.0, rel=1e-12)
