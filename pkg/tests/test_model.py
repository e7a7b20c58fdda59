import itertools
import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import find_dataset
from gdwd.errors import InvalidInputError
from gdwd.ingest import binarize_labels, load_libsvm
from gdwd.model import (ProblemData, compute_class_weights, compute_penalty_parameter,
                        median_interclass_distance, scale_problem)


class TestProblemData:
    def test_defaults(self):
        p = ProblemData(np.eye(2), [1, -1])
        assert p.d == 2 and p.n == 2
        np.testing.assert_array_equal(p.e, [1.0, 1.0])
        np.testing.assert_array_equal(p.tau, [1.0, 1.0])
        assert sp.issparse(p.X)

    @pytest.mark.parametrize("kwargs", [
        dict(y=[1, 1]),
        dict(y=[1, 0]),
        dict(y=[1, -1, 1]),
        dict(q=0.0),
        dict(q=-1.0),
        dict(C=0.0),
        dict(C=float("inf")),
        dict(e=[0.5, 0.5]),
        dict(e=[1.0, 0.0]),
        dict(tau=[1.0, 1.5]),
    ])
    def test_rejects(self, kwargs):
        args = dict(X=np.eye(2), y=[1, -1])
        args.update(kwargs)
        with pytest.raises(InvalidInputError):
            ProblemData(**args)

    def test_Z_scales_columns(self):
        p = ProblemData(np.eye(2), [1, -1])
        np.testing.assert_array_equal(p.Z.toarray(), np.diag([1.0, -1.0]))


class TestMedianDistance:
    def test_three_four_five(self):
        X = np.array([[0.0, 3.0], [0.0, 4.0]])
        assert median_interclass_distance(X, [1, -1]) == pytest.approx(5.0)

    def test_symmetric_pair(self):
        X = np.array([[0.0, 1.0, 2.0]])
        assert median_interclass_distance(X, [1, -1, 1]) == pytest.approx(1.0)

    def test_brute_force(self):
        rng = np.random.default_rng(3)
        X = rng.standard_normal((5, 40))
        y = np.repeat([1.0, -1.0], 20)
        oracle = np.median([np.linalg.norm(X[:, i] - X[:, j])
                            for i, j in itertools.product(range(20), range(20, 40))])
        assert median_interclass_distance(X, y) == pytest.approx(oracle, rel=1e-12)

    def test_sparse_input_matches_dense(self):
        rng = np.random.default_rng(4)
        X = rng.standard_normal((6, 30)) * (rng.random((6, 30)) < 0.3)
        y = np.where(np.arange(30) % 3 == 0, 1.0, -1.0)
        assert median_interclass_distance(sp.csc_matrix(X), y) == pytest.approx(
            median_interclass_distance(X, y), rel=1e-12)

    def test_subsampling_is_seeded(self):
        rng = np.random.default_rng(5)
        X = rng.standard_normal((3, 300))
        y = np.where(np.arange(300) < 150, 1.0, -1.0)
        a = median_interclass_distance(X, y, cap=20, seed=7)
        b = median_interclass_distance(X, y, cap=20, seed=7)
        assert a == b

    def test_missing_class(self):
        with pytest.raises(InvalidInputError):
            median_interclass_distance(np.eye(2), [1, 1])


class TestPenalty:
    def test_clamp_branch(self):
        assert compute_penalty_parameter(1000, 500, 1e6, 1.0) == pytest.approx(100.0)

    def test_formula(self):
        assert compute_penalty_parameter(1000, 500, 1.0, 1.0) == pytest.approx(
            100 * math.log(1000) * 10, rel=1e-12)

    def test_uses_d_when_larger(self):
        got = compute_penalty_parameter(100, 8000, 1.0, 2.0)
        assert got == pytest.approx(1000 * 10 * math.log(100) * 20, rel=1e-12)

    def test_rejects_zero_distance(self):
        with pytest.raises(InvalidInputError):
            compute_penalty_parameter(10, 10, 0.0, 1.0)

    def test_mushrooms_reference(self):
        path = find_dataset("mushrooms")
        if path is None:
            pytest.skip("mushrooms dataset not available (set GDWD_DATA_DIR)")
        X, raw = load_libsvm(path)
        y, _ = binarize_labels(raw)
        C = compute_penalty_parameter(X.shape[1], X.shape[0],
                                      median_interclass_distance(X, y), 1.0)
        # published value, printed to three significant digits
        assert float(f"{C:.2e}") == 3.75e2


class TestClassWeights:
    def test_balanced(self):
        np.testing.assert_allclose(compute_class_weights(np.repeat([1, -1], 5), 1.0), 1.0)

    def test_eighty_twenty_q1(self):
        y = np.repeat([1.0, -1.0], [80, 20])
        tau = compute_class_weights(y, 1.0)
        np.testing.assert_allclose(tau[y > 0], 0.5, rtol=1e-14)
        np.testing.assert_allclose(tau[y < 0], 1.0, rtol=1e-14)

    def test_eighty_twenty_q3(self):
        y = np.repeat([1.0, -1.0], [80, 20])
        tau = compute_class_weights(y, 3.0)
        np.testing.assert_allclose(tau[y > 0], 0.25 ** 0.25, rtol=1e-14)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 200), st.integers(1, 200), st.floats(0.25, 8.0))
    def test_range_and_minority(self, npos, nneg, q):
        y = np.repeat([1.0, -1.0], [npos, nneg])
        tau = compute_class_weights(y, q)
        assert np.all(tau > 0) and np.all(tau <= 1.0)
        assert tau.max() == 1.0
        minority = 1.0 if npos <= nneg else -1.0
        assert np.all(tau[y == minority] == 1.0)


class TestScaling:
    def test_unit_norm_is_identity(self):
        X = np.array([[0.6, 0.0], [0.0, 0.8]])
        s = scale_problem(ProblemData(X, [1, -1]))
        assert s.Z_scale == pytest.approx(1.0)
        np.testing.assert_allclose(s.Ztilde.toarray(), np.diag([0.6, -0.8]))

    def test_identity_two(self):
        s = scale_problem(ProblemData(np.eye(2), [1, -1]))
        assert s.Z_scale == pytest.approx(2 ** 0.25, rel=1e-14)
        assert s.ball_radius == s.Z_scale

    def test_roundtrip_feasible_point(self):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((4, 7))
        y = np.array([1, -1, 1, 1, -1, -1, 1.0])
        p = ProblemData(X, y)
        s = scale_problem(p)
        w = rng.standard_normal(4)
        w /= np.linalg.norm(w)
        beta = 0.3
        # a feasible scaled point: r = Ztilde^T wt + beta y + xi with ||wt|| <= Z_scale
        wt = w * s.Z_scale
        xi = np.abs(rng.standard_normal(7))
        r = s.Ztilde.T @ wt + beta * y + xi
        w0 = s.unscale(wt)
        assert np.linalg.norm(w0) <= 1.0 + 1e-10
        np.testing.assert_allclose(p.Z.T @ w0 + beta * y + xi, r, atol=1e-10)

    def test_zero_matrix(self):
        with pytest.raises(InvalidInputError):
            scale_problem(ProblemData(np.zeros((2, 2)), [1, -1]))

    def test_bad_mu(self):
        with pytest.raises(InvalidInputError):
            scale_problem(ProblemData(np.eye(2), [1, -1]), mu=0.0)
