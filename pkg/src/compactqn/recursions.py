"""Dense reference recursions for the rank-2 estimate updates.

These O(d^2) updates are the ground truth the compact representations
are checked against: the general parameterized inverse and direct
updates plus the classical BFGS and PSB special cases, each written in
the plain outer-product form with no algebraic regrouping. Clarity over
speed throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveCurvature, ZeroDenominator, ZeroVector

#: denominators below this magnitude are treated as vanished
DENOM_MIN = 1e-300


@dataclass
class DenseEstimate:
    """Explicit symmetric estimate evolved by a recursion.

    kind is "inverse_H" or "direct_B"; matrix is d x d.
    """

    matrix: np.ndarray
    kind: str = "inverse_H"

    @classmethod
    def identity(cls, d, scale=1.0, kind="inverse_H"):
        return cls(matrix=scale * np.eye(d), kind=kind)


def update_general_inverse(e: DenseEstimate, s, y, v) -> DenseEstimate:
    """One step of the general parameterized inverse update.

    H <- H + ((s - Hy)vᵀ + v(s - Hy)ᵀ)/(vᵀy) - ((s - Hy)ᵀy/(vᵀy)²) vvᵀ
    """
    if e.kind != "inverse_H":
        raise ValueError("estimate is not an inverse-Hessian estimate")
    h = e.matrix
    rho = float(v @ y)
    if abs(rho) < DENOM_MIN:
        raise ZeroDenominator("vᵀy vanished")
    r = s - h @ y
    new = h + (np.outer(r, v) + np.outer(v, r)) / rho \
        - (float(r @ y) / rho**2) * np.outer(v, v)
    return DenseEstimate(matrix=new, kind=e.kind)


def update_general_direct(e: DenseEstimate, s, y, c) -> DenseEstimate:
    """One step of the general parameterized direct update.

    B <- B + ((y - Bs)cᵀ + c(y - Bs)ᵀ)/(cᵀs) - ((y - Bs)ᵀs/(cᵀs)²) ccᵀ
    """
    if e.kind != "direct_B":
        raise ValueError("estimate is not a direct-Hessian estimate")
    b = e.matrix
    rho = float(c @ s)
    if abs(rho) < DENOM_MIN:
        raise ZeroDenominator("cᵀs vanished")
    r = y - b @ s
    new = b + (np.outer(r, c) + np.outer(c, r)) / rho \
        - (float(r @ s) / rho**2) * np.outer(c, c)
    return DenseEstimate(matrix=new, kind=e.kind)


def update_bfgs_inverse(e: DenseEstimate, s, y) -> DenseEstimate:
    """One BFGS step in the factored order (I - rho s yᵀ) H (I - rho y sᵀ) + rho s sᵀ."""
    if e.kind != "inverse_H":
        raise ValueError("estimate is not an inverse-Hessian estimate")
    sy = float(s @ y)
    if sy <= 0.0:
        raise NonPositiveCurvature("BFGS needs sᵀy > 0")
    rho = 1.0 / sy
    d = e.matrix.shape[0]
    left = np.eye(d) - rho * np.outer(s, y)
    new = left @ e.matrix @ left.T + rho * np.outer(s, s)
    return DenseEstimate(matrix=new, kind=e.kind)


def update_psb(e: DenseEstimate, s, y) -> DenseEstimate:
    """One PSB step, denominators sᵀs and (sᵀs)²."""
    if e.kind != "direct_B":
        raise ValueError("estimate is not a direct-Hessian estimate")
    ss = float(s @ s)
    if ss == 0.0:
        raise ZeroVector("PSB needs a nonzero step")
    b = e.matrix
    r = y - b @ s
    new = b + (np.outer(r, s) + np.outer(s, r)) / ss \
        - (float(r @ s) / ss**2) * np.outer(s, s)
    return DenseEstimate(matrix=new, kind=e.kind)
