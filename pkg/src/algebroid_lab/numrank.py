"""Numeric rank, null spaces and subspace comparisons (SVD based).

One rank policy is used everywhere: singular values below
``REL_RANK_TOL * max(s_max, 1)`` count as zero.  Subspace equality is
tested as rank(A) == rank(B) == rank([A | B]), which avoids comparing
bases directly.
"""

from __future__ import annotations

import numpy as np

REL_RANK_TOL = 1e-9


def _svals(M):
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    if M.size == 0:
        return np.zeros(0), M
    return np.linalg.svd(M, compute_uv=False), M


def rank_threshold(s) -> float:
    smax = float(s[0]) if len(s) else 0.0
    return REL_RANK_TOL * max(smax, 1.0)


def numeric_rank(M) -> int:
    s, _ = _svals(M)
    if not len(s):
        return 0
    return int(np.sum(s > rank_threshold(s)))


def null_space(M) -> np.ndarray:
    """Orthonormal basis of the kernel of M, as columns (n, k)."""
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    if M.shape[1] == 0:
        return np.zeros((0, 0))
    if M.size == 0 or not np.any(M):
        return np.eye(M.shape[1])
    _, s, vh = np.linalg.svd(M, full_matrices=True)
    r = int(np.sum(s > rank_threshold(s)))
    return vh[r:].T.copy()


def column_space(M) -> np.ndarray:
    """Orthonormal basis of the column space, as columns (m, r)."""
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    if M.size == 0 or not np.any(M):
        return np.zeros((M.shape[0], 0))
    u, s, _ = np.linalg.svd(M, full_matrices=False)
    r = int(np.sum(s > rank_threshold(s)))
    return u[:, :r].copy()


def spans_equal(A, B) -> bool:
    """Do the columns of A and B span the same subspace?"""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    ra, rb = numeric_rank(A), numeric_rank(B)
    if ra != rb:
        return False
    return numeric_rank(np.hstack([A, B])) == ra


def intersection_dim(A, B) -> int:
    """dim(span A ∩ span B) by rank arithmetic."""
    ra, rb = numeric_rank(A), numeric_rank(B)
    rab = numeric_rank(np.hstack([np.atleast_2d(A), np.atleast_2d(B)]))
    return ra + rb - rab


def membership_residual(basis, v) -> float:
    """Distance from v to the column span of `basis` (min-norm lstsq)."""
    basis = np.atleast_2d(np.asarray(basis, dtype=np.float64))
    v = np.asarray(v, dtype=np.float64).ravel()
    if basis.shape[1] == 0 or not np.any(basis):
        return float(np.linalg.norm(v))
    sol, *_ = np.linalg.lstsq(basis, v, rcond=None)
    return float(np.linalg.norm(basis @ sol - v))


def solve_min_norm(A, b) -> tuple[np.ndarray, float]:
    """Minimum-norm least-squares solution and its residual norm."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    b = np.asarray(b, dtype=np.float64).ravel()
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    return sol, float(np.linalg.norm(A @ sol - b))
