"""Dense symmetric kernels for small (K <= 10) covariance matrices.

Everything here operates on plain numpy arrays.  All matrices in scope are
covariance blocks, so the only factorization provided is Cholesky; failure of
a pivot is reported loudly instead of falling back to eigen methods.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DimensionMismatch, NotPositiveDefinite

# A pivot at or below PIVOT_RTOL * max(diag) declares the matrix not positive
# definite: estimated covariances at early looks can be near-singular and must
# fail loudly rather than produce garbage inverses.
PIVOT_RTOL = 1e-12

SYMMETRY_RTOL = 1e-12


def check_symmetric(m: np.ndarray, rtol: float = SYMMETRY_RTOL) -> np.ndarray:
    """Validate that ``m`` is square and symmetric to relative tolerance."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    scale = np.max(np.abs(m)) if m.size else 0.0
    if scale > 0 and np.max(np.abs(m - m.T)) > rtol * scale:
        raise DimensionMismatch("matrix is not symmetric to tolerance")
    return m


def chol_decompose(m: np.ndarray) -> np.ndarray:
    """Lower-triangular Cholesky factor of a symmetric positive definite matrix.

    Raises:
        NotPositiveDefinite: when any pivot falls at or below
            ``PIVOT_RTOL * max(diag)``.
    """
    m = check_symmetric(m)
    k = m.shape[0]
    if k == 0:
        raise DimensionMismatch("empty matrix")
    tol = PIVOT_RTOL * float(np.max(np.diag(m)))
    lower = np.zeros_like(m)
    for i in range(k):
        pivot = m[i, i] - lower[i, :i] @ lower[i, :i]
        if pivot <= tol:
            raise NotPositiveDefinite(
                f"pivot {pivot:.3e} at index {i} is at or below tolerance {tol:.3e}"
            )
        lower[i, i] = np.sqrt(pivot)
        if i + 1 < k:
            lower[i + 1 :, i] = (m[i + 1 :, i] - lower[i + 1 :, :i] @ lower[i, :i]) / lower[i, i]
    return lower


def spd_solve(m: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``m x = rhs`` for symmetric positive definite ``m`` via Cholesky."""
    lower = chol_decompose(m)
    y = solve_triangular(lower, rhs, lower=True)
    return solve_triangular(lower.T, y, lower=False)


def spd_inverse(m: np.ndarray) -> np.ndarray:
    """Inverse of a symmetric positive definite matrix."""
    inv = spd_solve(m, np.eye(m.shape[0]))
    return 0.5 * (inv + inv.T)


def padded_geninverse(v: np.ndarray, j: int) -> np.ndarray:
    """Generalized inverse of the leading j x j block, padded with zeros.

    The result has the inverse of ``v[:j, :j]`` in its upper-left block and
    exact zeros elsewhere, which is the Moore-Penrose inverse of the matrix
    that keeps only that block.
    """
    v = check_symmetric(v)
    k = v.shape[0]
    if not 1 <= j <= k:
        raise DimensionMismatch(f"active block size {j} outside 1..{k}")
    out = np.zeros((k, k))
    out[:j, :j] = spd_inverse(v[:j, :j])
    return out


def quad_form(vec: np.ndarray, m: np.ndarray) -> float:
    """Quadratic form vec' m vec.

    Nonnegative whenever ``m`` is positive semidefinite.
    """
    vec = np.asarray(vec, dtype=float)
    m = check_symmetric(m)
    if vec.ndim != 1 or vec.shape[0] != m.shape[0]:
        raise DimensionMismatch(
            f"vector of length {vec.shape} does not match matrix of dim {m.shape[0]}"
        )
    return float(vec @ (m @ vec))
