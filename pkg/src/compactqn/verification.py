"""Error tables comparing compact forms against the dense recursions.

For a seeded sequence of random pairs the compact representation and
the matching dense recursion are advanced side by side with a fixed
identity initialization; per step the table records the secant residual
(error1) and the Frobenius distance between the materialized compact
estimate and the recursion (error2). Fixed initialization is required
for the comparison to be exact: the plain recursions have no notion of
a per-iteration scale change.
"""

from __future__ import annotations

import numpy as np

from . import recursions
from .compact_direct import CompactDirect, bv_product, materialize_b
from .compact_inverse import CompactInverse, hv_product
from .history import LmHistory, PairPolicy, push_pair

VERIFY_MODES = ("general-s", "general-y", "general-rand", "bfgs", "psb", "greenstadt")


# pair draws keep a healthy relative coupling so the recursions stay
# well conditioned and the absolute error columns stay near round-off
_DRAW_GUARD = 0.3


def _draw_pair(rng, d, positive_curvature):
    while True:
        s = rng.standard_normal(d)
        y = rng.standard_normal(d)
        guard = _DRAW_GUARD * np.linalg.norm(s) * np.linalg.norm(y)
        sy = float(s @ y)
        if positive_curvature:
            if sy > guard:
                return s, y
        elif abs(sy) > guard:
            return s, y


def _draw_param(rng, d, y):
    while True:
        v = rng.standard_normal(d)
        if abs(float(v @ y)) >= _DRAW_GUARD * np.linalg.norm(v) * np.linalg.norm(y):
            return v


def error_rows(mode: str, d: int, k_max: int, seed: int) -> list[tuple[int, float, float]]:
    """Rows (k, error1, error2) for k = 1..k_max in the given mode.

    error1 is the secant residual of the compact estimate against the
    newest pair, error2 the Frobenius distance to the dense recursion.
    """
    if mode not in VERIFY_MODES:
        raise ValueError(f"unknown verify mode {mode!r}")
    rng = np.random.default_rng(seed)
    inverse_side = mode != "psb"
    positive = mode in ("bfgs", "general-s")

    if inverse_side:
        policy = PairPolicy({"general-s": "s", "bfgs": "s",
                             "general-y": "y", "greenstadt": "y",
                             "general-rand": "custom"}[mode])
        hist = LmHistory(d, l=max(k_max, 1), mode="inverse", policy=policy,
                         gamma=1.0, adapt_gamma=False)
        dense = recursions.DenseEstimate.identity(d, kind="inverse_H")
    else:
        hist = LmHistory(d, l=max(k_max, 1), mode="direct", policy=PairPolicy("s"),
                         gamma=1.0, adapt_gamma=False)
        dense = recursions.DenseEstimate.identity(d, kind="direct_B")

    rows = []
    for k in range(1, k_max + 1):
        s, y = _draw_pair(rng, d, positive)
        custom = _draw_param(rng, d, y) if mode == "general-rand" else None
        accepted = push_pair(hist, s, y, custom=custom)
        if not accepted:
            raise RuntimeError("verification pair unexpectedly rejected")

        if mode == "bfgs":
            dense = recursions.update_bfgs_inverse(dense, s, y)
            view = CompactInverse(hist, form="bfgs")
        elif mode == "greenstadt":
            dense = recursions.update_general_inverse(dense, s, y, y)
            view = CompactInverse(hist, form="greenstadt")
        elif mode == "psb":
            dense = recursions.update_psb(dense, s, y)
            view = CompactDirect(hist, form="psb")
        else:
            v = {"general-s": s, "general-y": y}.get(mode, custom)
            dense = recursions.update_general_inverse(dense, s, y, v)
            view = CompactInverse(hist, form="general")

        if inverse_side:
            err1 = float(np.linalg.norm(hv_product(view, y) - s))
            mat = view.materialize()
        else:
            err1 = float(np.linalg.norm(bv_product(view, s) - y))
            mat = materialize_b(view)
        err2 = float(np.linalg.norm(mat - dense.matrix))
        rows.append((k, err1, err2))
    return rows


def greenstadt_error_table(d: int, seed: int, k_max: int) -> list[tuple[int, float, float]]:
    """Secant and Frobenius errors of the closed Greenstadt form against
    the general recursion with v = y and fixed identity initialization."""
    return error_rows("greenstadt", d, k_max, seed)
