"""Implicit eigendecomposition of compact matrices.

A matrix B = (1/gamma) I + J K^{-1} Jᵀ with tall skinny J (d x 2m) has
at most 2m eigenvalues different from 1/gamma. A thin QR of J followed
by a small symmetric eigendecomposition of R K^{-1} Rᵀ produces those
explicit pairs at cost linear in d; the orthogonal complement carries
the repeated eigenvalue 1/gamma and is only ever touched through the
projection I - QQᵀ, so nothing of size d x d is formed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import sym_eig_small, thin_qr

#: relative threshold on the QR diagonal below which columns are
#: deflated (treated as rank deficiency in J)
DEFLATE_TOL = 1e-12


@dataclass
class ImplicitEigen:
    """Spectral factors {Q, Phat, hat_lambdas, gamma} of a compact matrix.

    Eigenvalues of B are hat_lambdas + 1/gamma on the explicit
    eigenspace spanned by P1 = Q Phat, and 1/gamma with multiplicity
    d - r on its complement.
    """

    q: np.ndarray
    phat: np.ndarray
    hat_lambdas: np.ndarray
    gamma: float

    @property
    def r(self):
        return self.q.shape[1]

    @property
    def lambda_min(self) -> float:
        base = 1.0 / self.gamma
        if self.hat_lambdas.size == 0:
            return base
        return min(base, float(self.hat_lambdas.min() + base))

    def full_spectrum(self, d: int) -> np.ndarray:
        """All d eigenvalues, ascending."""
        base = 1.0 / self.gamma
        return np.sort(np.concatenate([self.hat_lambdas + base,
                                       np.full(d - self.r, base)]))


def _fix_signs(p):
    """First nonzero component of every eigenvector made positive."""
    p = p.copy()
    for j in range(p.shape[1]):
        col = p[:, j]
        nz = np.flatnonzero(col)
        if nz.size and col[nz[0]] < 0.0:
            p[:, j] = -col
    return p


def implicit_eig(j: np.ndarray, k_solver, gamma: float) -> ImplicitEigen:
    """Factor B = (1/gamma) I + J K^{-1} Jᵀ without forming B.

    ``k_solver`` applies K^{-1} to one vector of length J.shape[1]; it
    is called once per column of Rᵀ. Columns whose QR diagonal falls
    below 1e-12 of the largest are deflated, reducing the explicit rank.
    """
    j = np.asarray(j, dtype=np.float64)
    if gamma <= 0.0:
        raise ValueError("gamma must be positive")
    d, width = j.shape
    if d < width:
        raise ValueError("J must be tall")
    if width == 0:
        return ImplicitEigen(q=np.zeros((d, 0)), phat=np.zeros((0, 0)),
                             hat_lambdas=np.zeros(0), gamma=float(gamma))
    q, r = thin_qr(j)
    diag = np.abs(np.diagonal(r))
    top = diag.max()
    keep = diag > DEFLATE_TOL * top if top > 0.0 else np.zeros(width, dtype=bool)
    if not keep.any():
        return ImplicitEigen(q=np.zeros((d, 0)), phat=np.zeros((0, 0)),
                             hat_lambdas=np.zeros(0), gamma=float(gamma))
    kinvrt = np.column_stack([k_solver(r[i, :]) for i in range(width)])
    a = r @ kinvrt
    a = 0.5 * (a + a.T)
    if not keep.all():
        a = a[np.ix_(keep, keep)]
        q = q[:, keep]
    phat, lam = sym_eig_small(a)
    phat = _fix_signs(phat)
    return ImplicitEigen(q=q, phat=phat, hat_lambdas=lam, gamma=float(gamma))


def apply_complement_projection(e: ImplicitEigen, x: np.ndarray) -> np.ndarray:
    """(1/gamma) (I - QQᵀ) x, the scaled projection onto the implicit
    eigenspace; never forms the complement basis."""
    x = np.asarray(x, dtype=np.float64)
    if e.r == 0:
        return x / e.gamma
    return (x - e.q @ (e.q.T @ x)) / e.gamma


def min_shift(e: ImplicitEigen, eps_pd: float = 1e-8) -> float:
    """Smallest nonnegative sigma making B + sigma I safely positive
    definite: max(0, -lambda_min + eps_pd max(1, |lambda_min|))."""
    if eps_pd <= 0.0:
        raise ValueError("eps_pd must be positive")
    lam = e.lambda_min
    return max(0.0, -lam + eps_pd * max(1.0, abs(lam)))
