"""Products and shifted solves with the direct-Hessian compact form.

The direct estimate mirrors the inverse one with the roles of the step
and gradient-difference columns interchanged:

    B = (1/gamma) I + [C, Y - (1/gamma) S] Mb^{-1} [C, Y - (1/gamma) S]^T

    Mb = [[0, Rcs], [Rcs^T, Wb]],
    Wb = R' + R'^T - (D + (1/gamma) SᵀS),   R' = triu(YᵀS).

Note the mirrored coupling: R' is the upper triangle of YᵀS, i.e. the
transpose of the cached SᵀY, while D is the shared diagonal. The same
two-triangular-solve pattern applies. The parameter choice c = s gives
the PSB estimate through the identical code path.

Shifted systems (B + sigma I) s = -h are solved through the implicit
eigendecomposition, which is what makes trust-region shifts cheap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionTooLarge, IndefiniteShift, NonFiniteInput
from .compact_inverse import MiddleFactors, solve_middle
from .history import LmHistory
from . import spectral

DIRECT_FORMS = ("general", "psb")

#: refuse to materialize beyond this dimension
MATERIALIZE_MAX_D = 2000


@dataclass
class ShiftedSolveResult:
    """Step from one shifted solve plus the shift diagnostics."""

    s: np.ndarray
    sigma: float
    lambda_min: float


class CompactDirect:
    """Read-only product view B x over a direct-mode history."""

    def __init__(self, history: LmHistory, form: str = "general"):
        if form not in DIRECT_FORMS:
            raise ValueError(f"unknown form {form!r}")
        if history.mode != "direct":
            raise ValueError("CompactDirect requires a direct-mode history")
        if form == "psb" and (history.policy.kind != "s" or history.mixed_policies):
            raise ValueError("psb form requires the c = s pair policy")
        self.history = history
        self.form = form

    @property
    def gamma(self):
        return self.history.gamma


def build_middle_direct(h: LmHistory) -> MiddleFactors:
    """Middle blocks of the direct form, pure cache arithmetic."""
    if h.mode != "direct":
        raise ValueError("expected a direct-mode history")
    sy = h.sy()
    r_mirror = np.triu(sy.T)
    w = r_mirror + r_mirror.T - (np.diag(np.diagonal(sy)) + (1.0 / h.gamma) * h.gg())
    rcs = np.triu(h.pa())
    return MiddleFactors(rvy=rcs, w=w)


def bv_product(cd: CompactDirect, x: np.ndarray) -> np.ndarray:
    """Product B x; (1/gamma) x on an empty history."""
    x = np.asarray(x, dtype=np.float64)
    h = cd.history
    if x.shape != (h.d,):
        raise ValueError(f"expected a vector of length {h.d}")
    if not np.isfinite(x).all():
        raise NonFiniteInput("bv_product input must be finite")
    ginv = 1.0 / h.gamma
    if h.m == 0:
        return ginv * x
    f = build_middle_direct(h)
    cx = h.p_store.dots(x)
    sx = h.s_store.dots(x)
    yx = h.y_store.dots(x)
    u = np.concatenate([cx, yx - ginv * sx])
    w = solve_middle(f, u)
    h.add_mults(2 * f.m * f.m)
    w1, w2 = w[: h.m], w[h.m :]
    out = ginv * x
    out += h.p_store.combine(w1)
    out += h.y_store.combine(w2)
    out -= ginv * h.s_store.combine(w2)
    h.add_mults(2 * h.d)
    return out


def materialize_b(cd: CompactDirect) -> np.ndarray:
    """Explicit d x d estimate via d unit-vector products."""
    d = cd.history.d
    if d > MATERIALIZE_MAX_D:
        raise DimensionTooLarge(f"refusing to materialize beyond d = {MATERIALIZE_MAX_D}")
    eye = np.eye(d)
    return np.column_stack([bv_product(cd, eye[:, i]) for i in range(d)])


def implicit_factors(cd: CompactDirect):
    """(J, K-solver, gamma) so that B = (1/gamma) I + J K^{-1} Jᵀ."""
    h = cd.history
    if h.m == 0:
        return np.zeros((h.d, 0)), lambda rhs: rhs, h.gamma
    f = build_middle_direct(h)
    j = np.hstack([h.p_store.view(), h.y_store.view() - (1.0 / h.gamma) * h.s_store.view()])
    return j, lambda rhs: solve_middle(f, rhs), h.gamma


def _apply_shifted_inverse(eig, rhs, sigma):
    base = 1.0 / eig.gamma + sigma
    t = eig.q.T @ rhs
    z = eig.phat.T @ t
    explicit = eig.q @ (eig.phat @ (z / (eig.hat_lambdas + base)))
    return explicit + (rhs - eig.q @ t) / base


def shifted_solve(cd: CompactDirect, h_vec: np.ndarray, sigma: float,
                  eig: "spectral.ImplicitEigen | None" = None) -> ShiftedSolveResult:
    """Solve (B + sigma I) s = -h through the implicit eigendecomposition.

    With P1 = Q Phat carrying the explicit eigenpairs,

        s = -P1 (Lhat + 1/gamma + sigma)^{-1} P1ᵀ h
            - (1/gamma + sigma)^{-1} (h - Q Qᵀ h),

    followed by up to two iterative-refinement passes against the exact
    compact product, which keeps the residual small even when the shift
    leaves B + sigma I barely positive definite. ``eig`` may be passed
    to reuse one factorization across several shifts. Raises
    IndefiniteShift when B + sigma I is not positive definite.
    """
    h_vec = np.asarray(h_vec, dtype=np.float64)
    if eig is None:
        j, ksolve, gamma = implicit_factors(cd)
        eig = spectral.implicit_eig(j, ksolve, gamma)
    base = 1.0 / eig.gamma + sigma
    shifted = eig.hat_lambdas + base
    if base <= 0.0 or (shifted.size > 0 and shifted.min() <= 0.0):
        raise IndefiniteShift("B + sigma I has a nonpositive eigenvalue")
    s = -_apply_shifted_inverse(eig, h_vec, sigma)
    hnorm = float(np.max(np.abs(h_vec))) if h_vec.size else 0.0
    tol = 1e-12 * (1.0 + hnorm)
    for _ in range(2):
        resid = bv_product(cd, s) + sigma * s + h_vec
        if float(np.max(np.abs(resid))) <= tol:
            break
        s = s - _apply_shifted_inverse(eig, resid, sigma)
    return ShiftedSolveResult(s=s, sigma=float(sigma), lambda_min=eig.lambda_min)
