"""Matrix-free products with the inverse-Hessian compact representation.

After m accepted pairs the estimate is

    H = gamma I + [V, S - gamma Y] M^{-1} [V, S - gamma Y]^T

with the middle matrix

    M = [[0, Rvy], [Rvy^T, W]],    W = R + R^T - (D + gamma YᵀY),

where Rvy is the upper triangle of VᵀY and R, D are the upper triangle
and diagonal of SᵀY. M is never assembled: its inverse has the closed
block form whose application costs two triangular solves, so one
product H x costs O(m d) and no d x d array is ever formed.

Four evaluation paths are provided: the general two-block form above,
an alternative three-block regrouping over [V, S, gamma Y] that keeps
S and gamma Y separate, and the classical closed forms for the
parameter policies v = s (BFGS) and v = y (Greenstadt, which requires
a gamma frozen at construction).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import EmptyHistory, NonFiniteInput, NonPositiveCurvature
from .history import LmHistory
from .linalg import tri_solve

log = logging.getLogger(__name__)

FORMS = ("general", "alternative", "bfgs", "greenstadt")

#: relative threshold on the coupling-triangle diagonal below which a
#: product falls back to the initialization instead of amplifying noise
RVY_COND_TOL = 1e-12


@dataclass
class MiddleFactors:
    """The two small blocks that define the middle matrix M.

    rvy is the m x m coupling triangle (upper triangular, nonzero
    diagonal by the pair-acceptance guard) and w the symmetric block
    R + Rᵀ - (D + gamma YᵀY).
    """

    rvy: np.ndarray
    w: np.ndarray

    @property
    def m(self):
        return self.rvy.shape[0]


def build_middle(h: LmHistory) -> MiddleFactors:
    """Extract the middle-matrix blocks from the history caches.

    Pure cache arithmetic, no d-length work.
    """
    if h.m == 0:
        raise EmptyHistory("middle matrix needs at least one pair")
    if h.mode != "inverse":
        raise ValueError("build_middle expects an inverse-mode history")
    sy = h.sy()
    r = np.triu(sy)
    w = r + r.T - (np.diag(np.diagonal(sy)) + h.gamma * h.gg())
    rvy = np.triu(h.pa())
    return MiddleFactors(rvy=rvy, w=w)


def solve_middle(f: MiddleFactors, rhs: np.ndarray) -> np.ndarray:
    """Apply M^{-1} to a stacked right-hand side (a; b).

    Uses the closed block inverse: with x2 = Rvy^{-1} a the result is
    (Rvy^{-T}(b - W x2); x2). Cost O(m^2); rhs may carry multiple
    columns.
    """
    m = f.m
    if rhs.shape[0] != 2 * m:
        raise ValueError("right-hand side must have length 2m")
    a, b = rhs[:m], rhs[m:]
    x2 = tri_solve(f.rvy, a)
    x1 = tri_solve(f.rvy, b - f.w @ x2, transposed=True)
    return np.concatenate([x1, x2])


def _rvy_ill_conditioned(rvy):
    diag = np.abs(np.diagonal(rvy))
    return diag.size > 0 and diag.min() < RVY_COND_TOL * diag.max()


class CompactInverse:
    """Read-only product view H x over an inverse-mode history.

    form selects the evaluation path; "bfgs" requires the v = s policy
    and "greenstadt" the v = y policy. The Greenstadt path freezes
    gamma at construction: its middle matrix is only valid for a single
    initialization scale, so the view must be rebuilt after gamma
    changes.
    """

    def __init__(self, history: LmHistory, form: str = "general"):
        if form not in FORMS:
            raise ValueError(f"unknown form {form!r}")
        if history.mode != "inverse":
            raise ValueError("CompactInverse requires an inverse-mode history")
        if form == "bfgs" and (history.policy.kind != "s" or history.mixed_policies):
            raise ValueError("bfgs form requires the v = s pair policy")
        if form == "greenstadt" and (history.policy.kind != "y" or history.mixed_policies):
            raise ValueError("greenstadt form requires the v = y pair policy")
        self.history = history
        self.form = form
        self.gamma_frozen = history.gamma if form == "greenstadt" else None

    @property
    def gamma(self):
        return self.gamma_frozen if self.form == "greenstadt" else self.history.gamma

    def materialize(self):
        """Explicit d x d estimate via d unit-vector products (test support)."""
        d = self.history.d
        eye = np.eye(d)
        return np.column_stack([hv_product(self, eye[:, i]) for i in range(d)])


def hv_product(ci: CompactInverse, x: np.ndarray) -> np.ndarray:
    """Product H x for the configured form; gamma x on an empty history."""
    x = np.asarray(x, dtype=np.float64)
    h = ci.history
    if x.shape != (h.d,):
        raise ValueError(f"expected a vector of length {h.d}")
    if not np.isfinite(x).all():
        raise NonFiniteInput("hv_product input must be finite")
    if h.m == 0:
        return ci.gamma * x
    if ci.form == "bfgs":
        return hv_product_bfgs(ci, x)
    if ci.form == "greenstadt":
        return hv_product_greenstadt(ci, x)
    if ci.form == "alternative":
        return _hv_alternative(ci, x)
    return _hv_general(ci, x)


def _hv_general(ci, x):
    h = ci.history
    g = h.gamma
    f = build_middle(h)
    if _rvy_ill_conditioned(f.rvy):
        log.warning("coupling triangle nearly singular; falling back to gamma*x")
        return g * x
    vx = h.p_store.dots(x)
    sx = h.s_store.dots(x)
    yx = h.y_store.dots(x)
    u = np.concatenate([vx, sx - g * yx])
    w = solve_middle(f, u)
    h.add_mults(2 * f.m * f.m)
    w1, w2 = w[: h.m], w[h.m :]
    out = g * x
    out += h.p_store.combine(w1)
    out += h.s_store.combine(w2)
    out -= g * h.y_store.combine(w2)
    h.add_mults(2 * h.d)
    return out


def _hv_alternative(ci, x):
    # three-block layout over [V, S, gamma Y]; the expanded middle is
    #   [[A, B, -B], [C, 0, 0], [-C, 0, 0]]
    # with [[A, B], [C, 0]] = M^{-1}, B = Rvy^{-T}, C = Rvy^{-1}
    h = ci.history
    g = h.gamma
    f = build_middle(h)
    if _rvy_ill_conditioned(f.rvy):
        log.warning("coupling triangle nearly singular; falling back to gamma*x")
        return g * x
    a = h.p_store.dots(x)
    b = h.s_store.dots(x)
    c = g * h.y_store.dots(x)
    t = tri_solve(f.rvy, a)
    w_v = -tri_solve(f.rvy, f.w @ t, transposed=True)
    w_v += tri_solve(f.rvy, b, transposed=True)
    w_v -= tri_solve(f.rvy, c, transposed=True)
    h.add_mults(3 * f.m * f.m)
    out = g * x
    out += h.p_store.combine(w_v)
    out += h.s_store.combine(t)
    out -= g * h.y_store.combine(t)
    h.add_mults(2 * h.d)
    return out


def hv_product_bfgs(ci: CompactInverse, x: np.ndarray) -> np.ndarray:
    """Closed BFGS form over [S, gamma Y].

    H x = gamma x + [S, gamma Y] [[R^{-T}(D + gamma YᵀY)R^{-1}, -R^{-T}],
    [-R^{-1}, 0]] [Sᵀ; gamma Yᵀ] x, valid for v = s with positive
    curvature on every stored pair.
    """
    if ci.form != "bfgs":
        raise ValueError("view was not built with form='bfgs'")
    h = ci.history
    if h.m == 0:
        return ci.gamma * x
    g = h.gamma
    sy = h.sy()
    diag = np.diagonal(sy)
    if np.any(diag <= 0.0):
        raise NonPositiveCurvature("a stored pair has s_iᵀy_i <= 0")
    r = np.triu(sy)
    middle = np.diag(diag) + g * h.gg()
    a = h.s_store.dots(x)
    b = g * h.y_store.dots(x)
    t = tri_solve(r, a)
    w1 = tri_solve(r, middle @ t - b, transposed=True)
    h.add_mults(2 * h.m * h.m)
    out = g * x
    out += h.s_store.combine(w1)
    out -= g * h.y_store.combine(t)
    h.add_mults(2 * h.d)
    return out


def hv_product_greenstadt(ci: CompactInverse, x: np.ndarray) -> np.ndarray:
    """Closed Greenstadt form (v = y) over [S, gamma Y] with frozen gamma.

    H x = gamma x + [S, gamma Y] N^{-1} [Sᵀ; gamma Yᵀ] x where

        N = [[W + gamma (Ryy + Ryyᵀ), gamma Ryyᵀ], [gamma Ryy, 0]]

    and Ryy is the upper triangle of YᵀY. The zero block makes the
    solve two triangular solves against Ryy.
    """
    if ci.form != "greenstadt":
        raise ValueError("view was not built with form='greenstadt'")
    h = ci.history
    if h.m == 0:
        return ci.gamma * x
    g = ci.gamma_frozen
    sy = h.sy()
    yy = h.gg()
    r = np.triu(sy)
    ryy = np.triu(yy)
    n11 = r + r.T - (np.diag(np.diagonal(sy)) + g * yy) + g * ryy + g * ryy.T
    a = h.s_store.dots(x)
    b = g * h.y_store.dots(x)
    w1 = tri_solve(ryy, b) / g
    w2 = tri_solve(ryy, a - n11 @ w1, transposed=True) / g
    h.add_mults(2 * h.m * h.m)
    out = g * x
    out += h.s_store.combine(w1)
    out += g * h.y_store.combine(w2)
    h.add_mults(2 * h.d)
    return out


def implicit_factors(ci: CompactInverse):
    """(J, K-solver, base gamma) so that H = (1/base) I + J K^{-1} Jᵀ.

    Feeds the spectral module: the inverse estimate has base eigenvalue
    gamma, hence the reciprocal is passed.
    """
    h = ci.history
    g = h.gamma
    if h.m == 0:
        return np.zeros((h.d, 0)), lambda rhs: rhs, 1.0 / g
    f = build_middle(h)
    j = np.hstack([h.p_store.view(), h.s_store.view() - g * h.y_store.view()])
    return j, lambda rhs: solve_middle(f, rhs), 1.0 / g
