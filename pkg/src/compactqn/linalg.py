"""Dense linear-algebra kernels shared by the rest of the package.

Thin wrappers over LAPACK through numpy/scipy that pin down the
conventions everything else relies on: triangular solves that reject an
exactly singular triangle, a deterministic thin QR with nonnegative
R diagonal, and ascending symmetric eigendecompositions.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import NotSymmetric, SingularTriangular


def tri_solve(r: np.ndarray, b: np.ndarray, transposed: bool = False) -> np.ndarray:
    """Solve R x = b (or Rᵀ x = b when ``transposed``) for upper-triangular R.

    Only the upper triangle of ``r`` is referenced; ``b`` may be a vector
    or a matrix of right-hand sides. Substitution runs last-to-first for
    the plain solve and first-to-last for the transposed one.
    """
    r = np.asarray(r, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n = r.shape[0]
    if r.ndim != 2 or r.shape[1] != n:
        raise ValueError("triangular factor must be square")
    if b.shape[0] != n:
        raise ValueError("right-hand side length does not match the factor order")
    if n == 0:
        return np.zeros_like(b)
    if np.any(np.diagonal(r) == 0.0):
        raise SingularTriangular("zero diagonal entry in triangular factor")
    return scipy.linalg.solve_triangular(
        r, b, lower=False, trans="T" if transposed else "N", check_finite=False
    )


def thin_qr(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Thin QR factorization A = Q R with a nonnegative R diagonal.

    Householder-based (LAPACK), pivot free, hence deterministic for a
    given input. Requires rows >= cols; rank-deficient inputs are allowed
    and simply produce near-zero diagonal entries in R.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("expected a matrix")
    if a.shape[0] < a.shape[1]:
        raise ValueError("thin QR requires rows >= cols")
    q, r = np.linalg.qr(a, mode="reduced")
    flip = np.diagonal(r) < 0.0
    if np.any(flip):
        q = q.copy()
        r = r.copy()
        q[:, flip] *= -1.0
        r[flip, :] *= -1.0
    return q, r


def sym_eig_small(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition M = P diag(lam) Pᵀ of a small symmetric matrix.

    Returns (P, lam) with eigenvalues ascending. Raises NotSymmetric when
    the symmetry defect exceeds 1e-12 relative to ||M||_F.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("expected a square matrix")
    scale = np.linalg.norm(m)
    if np.linalg.norm(m - m.T) > 1e-12 * scale:
        raise NotSymmetric("matrix is not symmetric within 1e-12 relative tolerance")
    lam, p = np.linalg.eigh(0.5 * (m + m.T))
    return p, lam
