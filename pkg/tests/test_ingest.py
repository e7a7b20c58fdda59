import bz2
import gzip
import io

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from gdwd.errors import InvalidInputError, ParseError
from gdwd.ingest import (binarize_labels, build_Z, load_libsvm, parse_libsvm,
                         write_libsvm)


def canonical(X, labels):
    buf = io.StringIO()
    write_libsvm(X, labels, buf)
    return buf.getvalue()


class TestParse:
    def test_basic(self):
        X, lab = parse_libsvm("+1 1:0.5 3:2\n-1 2:1\n")
        assert X.shape == (3, 2)
        np.testing.assert_array_equal(lab, [1.0, -1.0])
        np.testing.assert_array_equal(X.toarray(), [[0.5, 0.0], [0.0, 1.0], [2.0, 0.0]])

    def test_explicit_zero_dropped(self):
        X, _ = parse_libsvm("1 2:0\n")
        assert X.shape == (2, 1)
        assert X.nnz == 0

    def test_blank_and_comment_lines(self):
        X, lab = parse_libsvm("# header\n\n1 1:1  # trailing\n\n-1 1:2\n")
        assert X.shape == (1, 2)
        np.testing.assert_array_equal(lab, [1, -1])

    def test_explicit_dimension(self):
        X, _ = parse_libsvm("1 1:1\n", d=4)
        assert X.shape == (4, 1)

    def test_dimension_too_small(self):
        with pytest.raises(InvalidInputError):
            parse_libsvm("1 5:1\n", d=4)

    @pytest.mark.parametrize("text,line", [
        ("abc 1:1\n", 1),
        ("1 1:1\n1 2\n", 2),
        ("1 x:1\n", 1),
        ("1 1:y\n", 1),
        ("1 0:1\n", 1),
        ("1 3:1 2:1\n", 1),
        ("1 1:1\n\n1 2:1 2:3\n", 3),
    ])
    def test_malformed(self, text, line):
        with pytest.raises(ParseError) as info:
            parse_libsvm(text)
        assert info.value.lineno == line
        assert str(info.value).startswith(f"line {line}:")

    def test_empty(self):
        with pytest.raises(InvalidInputError):
            parse_libsvm("\n# nothing\n")

    def test_sorted_indices(self):
        X, _ = parse_libsvm("1 2:1 7:3\n-1 1:4 9:5\n")
        assert X.has_sorted_indices
        assert isinstance(X, sp.csc_matrix)


class TestRoundTrip:
    def test_canonical_form(self):
        text = "+1 1:0.50 3:2.0\n-1 2:1 4:0\n"
        X, lab = parse_libsvm(text)
        assert canonical(X, lab) == "1 1:0.5 3:2\n-1 2:1\n"

    def test_random_matrices(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            d, n = rng.integers(1, 12, size=2)
            dense = rng.standard_normal((d, n)) * (rng.random((d, n)) < 0.4)
            dense[-1, 0] = 1.5  # pin the dimension
            labels = rng.choice([-1.0, 1.0], n)
            s = canonical(sp.csc_matrix(dense), labels)
            X, lab = parse_libsvm(s)
            np.testing.assert_array_equal(X.toarray(), dense)
            np.testing.assert_array_equal(lab, labels)
            assert canonical(X, lab) == s

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64)
                    .filter(lambda v: v != 0), min_size=1, max_size=8))
    def test_values_exact(self, vals):
        X = sp.csc_matrix(np.array(vals)[:, None])
        s = canonical(X, [1.0])
        Y, _ = parse_libsvm(s)
        np.testing.assert_array_equal(Y.toarray().ravel(), vals)

    @pytest.mark.parametrize("suffix,opener", [(".gz", gzip.open), (".bz2", bz2.open)])
    def test_compressed_files(self, tmp_path, suffix, opener):
        path = tmp_path / f"toy{suffix}"
        with opener(path, "wt") as fh:
            fh.write("1 1:1\n-1 2:2\n")
        X, lab = load_libsvm(path)
        assert X.shape == (2, 2)


class TestBinarize:
    def test_zero_one(self):
        y, mapping = binarize_labels([0, 1, 1, 0])
        np.testing.assert_array_equal(y, [-1, 1, 1, -1])
        assert mapping == {0.0: -1, 1.0: 1}

    def test_identity(self):
        raw = [-1, 1, 1, -1, 1]
        y, _ = binarize_labels(raw)
        np.testing.assert_array_equal(y, raw)

    def test_two_four(self):
        raw = np.array([2, 4, 4, 2, 2, 4, 2, 2, 4, 4])
        y, mapping = binarize_labels(raw)
        np.testing.assert_array_equal(y, np.where(raw == 4, 1, -1))
        assert mapping == {2.0: -1, 4.0: 1}

    @pytest.mark.parametrize("raw", [[1, 1, 1], [1, 2, 3]])
    def test_not_binary(self, raw):
        with pytest.raises(InvalidInputError):
            binarize_labels(raw)


class TestBuildZ:
    def test_all_ones(self):
        X = sp.random(4, 6, density=0.5, random_state=1, format="csc")
        np.testing.assert_array_equal(build_Z(X, np.ones(6)).toarray(), X.toarray())

    def test_identity(self):
        Z = build_Z(sp.identity(2, format="csc"), [1, -1])
        np.testing.assert_array_equal(Z.toarray(), np.diag([1.0, -1.0]))

    def test_dense_oracle(self):
        rng = np.random.default_rng(2)
        X = rng.standard_normal((5, 7)) * (rng.random((5, 7)) < 0.6)
        y = rng.choice([-1.0, 1.0], 7)
        Z = build_Z(sp.csc_matrix(X), y)
        np.testing.assert_array_equal(Z.toarray(), X @ np.diag(y))
        assert Z.nnz == sp.csc_matrix(X).nnz

    def test_length_mismatch(self):
        with pytest.raises(InvalidInputError):
            build_Z(sp.identity(2, format="csc"), [1, -1, 1])
