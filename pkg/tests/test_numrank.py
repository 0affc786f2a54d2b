"""Rank policy and subspace comparisons."""

import numpy as np

from algebroid_lab.numrank import intersection_dim, membership_residual, \
    null_space, numeric_rank, spans_equal


def test_rank_threshold_floor():
    # the relative threshold has floor 1: tiny-but-clean matrices keep
    # their rank, near-zero noise does not create one
    assert numeric_rank(np.array([[1e-6, 0], [0, 0]])) == 1
    assert numeric_rank(np.array([[1e-12, 0], [0, 0]])) == 0
    assert numeric_rank(np.zeros((3, 3))) == 0
    assert numeric_rank(np.eye(4)) == 4


def test_null_space_orthonormal():
    A = np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0]])
    N = null_space(A)
    assert N.shape == (3, 2)
    np.testing.assert_allclose(A @ N, 0, atol=1e-12)
    np.testing.assert_allclose(N.T @ N, np.eye(2), atol=1e-12)


def test_spans_equal_symmetric_and_transitive():
    rng = np.random.default_rng(0)
    base = rng.normal(size=(5, 2))
    # three different bases of the same plane plus one outsider
    A = base
    B = base @ rng.normal(size=(2, 2)) + 0.0
    C = np.hstack([base[:, :1] + base[:, 1:], base[:, :1] - base[:, 1:]])
    D = rng.normal(size=(5, 2))
    for X, Y in ((A, B), (B, C), (A, C)):
        assert spans_equal(X, Y) and spans_equal(Y, X)
    assert not spans_equal(A, D) and not spans_equal(D, A)
    # rank arithmetic consistency: dim(span ∩ span) matches equality
    assert intersection_dim(A, B) == 2
    assert intersection_dim(A, D) < 2


def test_membership_residual():
    basis = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    assert membership_residual(basis, [0.3, -0.7, 0.0]) < 1e-14
    assert abs(membership_residual(basis, [0.0, 0.0, 2.0]) - 2.0) < 1e-14
    # empty basis: distance is the norm itself
    assert abs(membership_residual(np.zeros((3, 0)), [0, 3, 4]) - 5.0) < 1e-12
