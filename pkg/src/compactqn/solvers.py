"""Optimization drivers over the compact representations.

Three step rules: a strong-Wolfe line search on the inverse form
(steps w - alpha H g), an eigenvalue-shifted trust region on the direct
form (steps from (B + sigma I) s = -g with ||s|| <= delta), and a
fixed-step mini-batch loop for stochastic objectives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .compact_direct import CompactDirect, bv_product, implicit_factors, shifted_solve
from .compact_inverse import CompactInverse, hv_product
from .errors import LineSearchFail
from .history import LmHistory, PairPolicy, push_pair
from .spectral import implicit_eig, min_shift

#: relative curvature threshold below which a pair is not pushed when
#: the v = s policy needs positive definiteness
CURVATURE_GUARD = 1e-10

WOLFE_MAX_EVALS = 30
TR_BISECT_MAX = 40


@dataclass
class SolverConfig:
    l: int = 5
    tol_g: float = 1e-5
    max_iter: int = 1000
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    tr_delta0: float = 1.0
    tr_eta: float = 0.1
    tr_eps_pd: float = 1e-8
    alpha: float = 0.5
    batch_size: int = 256
    epochs: int = 10
    policy: PairPolicy = field(default_factory=lambda: PairPolicy("s"))
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.wolfe_c1 < self.wolfe_c2 < 1.0):
            raise ValueError("need 0 < c1 < c2 < 1")
        if self.tol_g <= 0.0:
            raise ValueError("tol_g must be positive")
        if self.l < 1:
            raise ValueError("memory l must be >= 1")


@dataclass
class SolveReport:
    status: str
    iterations: int
    f_final: float
    gnorm_final: float
    f_evals: int
    g_evals: int
    skip_count: int
    trace: list
    w_final: np.ndarray | None = None


def _cubic_step(a0, f0, g0, a1, f1, g1):
    """Minimizer of the cubic through two (point, value, slope) triples,
    or None when the interpolant has no interior minimizer."""
    if a0 == a1:
        return None
    d1 = g0 + g1 - 3.0 * (f0 - f1) / (a0 - a1)
    disc = d1 * d1 - g0 * g1
    if disc < 0.0 or not np.isfinite(disc):
        return None
    d2 = math.sqrt(disc) * (1.0 if a1 >= a0 else -1.0)
    denom = g1 - g0 + 2.0 * d2
    if denom == 0.0:
        return None
    t = a1 - (a1 - a0) * ((g1 + d2 - d1) / denom)
    if not np.isfinite(t):
        return None
    return t


def wolfe_linesearch(problem, w, p, f0, g0, cfg: SolverConfig):
    """Bracket-then-zoom strong Wolfe search along p from w.

    Returns (alpha, f_new, g_new, evals) with alpha satisfying both the
    sufficient-decrease and strong curvature conditions. The first trial
    is alpha = 1; at most 30 function/gradient evaluations are spent
    before LineSearchFail is raised. Requires a descent direction.
    """
    gd0 = float(p @ g0)
    if gd0 >= 0.0:
        raise ValueError("line search needs a descent direction")
    c1, c2 = cfg.wolfe_c1, cfg.wolfe_c2
    evals = 0

    def phi(a):
        nonlocal evals
        evals += 1
        f, g = problem.eval(w + a * p)
        return f, g, float(p @ g)

    def zoom(a_lo, f_lo, gd_lo, a_hi, f_hi, gd_hi):
        nonlocal evals
        while evals < WOLFE_MAX_EVALS:
            lo, hi = min(a_lo, a_hi), max(a_lo, a_hi)
            width = hi - lo
            if width <= 1e-16 * max(1.0, hi):
                break
            t = _cubic_step(a_lo, f_lo, gd_lo, a_hi, f_hi, gd_hi)
            if t is None or not (lo + 0.1 * width <= t <= hi - 0.1 * width):
                t = 0.5 * (a_lo + a_hi)
            f_t, g_t, gd_t = phi(t)
            if not np.isfinite(f_t) or f_t > f0 + c1 * t * gd0 or f_t >= f_lo:
                a_hi, f_hi, gd_hi = t, f_t, gd_t
            else:
                if abs(gd_t) <= c2 * abs(gd0):
                    return t, f_t, g_t
                if gd_t * (a_hi - a_lo) >= 0.0:
                    a_hi, f_hi, gd_hi = a_lo, f_lo, gd_lo
                a_lo, f_lo, gd_lo = t, f_t, gd_t
        raise LineSearchFail("no strong Wolfe point within the trial budget")

    a_prev, f_prev, gd_prev = 0.0, f0, gd0
    g_prev = g0
    a = 1.0
    first = True
    while evals < WOLFE_MAX_EVALS:
        f_a, g_a, gd_a = phi(a)
        if not np.isfinite(f_a) or f_a > f0 + c1 * a * gd0 or (not first and f_a >= f_prev):
            alpha, f_new, g_new = zoom(a_prev, f_prev, gd_prev, a, f_a, gd_a)
            return alpha, f_new, g_new, evals
        if abs(gd_a) <= c2 * abs(gd0):
            return a, f_a, g_a, evals
        if gd_a >= 0.0:
            alpha, f_new, g_new = zoom(a, f_a, gd_a, a_prev, f_prev, gd_prev)
            return alpha, f_new, g_new, evals
        a_prev, f_prev, gd_prev, g_prev = a, f_a, gd_a, g_a
        a = 2.0 * a
        first = False
    raise LineSearchFail("no strong Wolfe point within the trial budget")


def _scaled_steepest(g):
    return -g / max(1.0, float(np.linalg.norm(g)))


def minimize_linesearch(problem, w0, cfg: SolverConfig | None = None,
                        history: LmHistory | None = None) -> SolveReport:
    """Line-search driver on the inverse compact form.

    Directions are p = -H g through hv_product; the first iteration
    (empty history) takes scaled steepest descent. Accepted pairs are
    pushed with the configured policy; with the v = s policy pairs of
    nonpositive curvature are skipped to preserve positive definiteness.
    On a line-search failure the history is cleared and one steepest
    descent restart is attempted. ``history`` lets the caller own the
    pair store, e.g. to factor the final estimate afterwards.
    """
    cfg = cfg or SolverConfig()
    w = np.asarray(w0, dtype=np.float64).copy()
    d = w.size
    hist = history if history is not None else LmHistory(d, l=cfg.l, mode="inverse", policy=cfg.policy)
    view = CompactInverse(hist, form="general")
    f, g = problem.eval(w)
    f_evals = 1
    solver_skips = 0
    trace = []
    status = "max_iter"
    k = 0
    retried = False
    while k < cfg.max_iter:
        gnorm = float(np.max(np.abs(g))) if g.size else 0.0
        if not (np.isfinite(f) and np.isfinite(g).all()):
            status = "numerical_fail"
            break
        if gnorm <= cfg.tol_g:
            status = "converged"
            break
        if hist.m == 0:
            p = _scaled_steepest(g)
        else:
            p = -hv_product(view, g)
            if float(p @ g) >= 0.0:
                hist.clear()
                p = _scaled_steepest(g)
        try:
            alpha, f_new, g_new, evals = wolfe_linesearch(problem, w, p, f, g, cfg)
            retried = False
        except LineSearchFail:
            f_evals += WOLFE_MAX_EVALS
            if retried:
                status = "line_search_fail"
                break
            retried = True
            hist.clear()
            p = _scaled_steepest(g)
            try:
                alpha, f_new, g_new, evals = wolfe_linesearch(problem, w, p, f, g, cfg)
            except LineSearchFail:
                status = "line_search_fail"
                break
        f_evals += evals
        s = alpha * p
        y = g_new - g
        if cfg.policy.kind == "s" and float(s @ y) <= CURVATURE_GUARD * np.linalg.norm(s) * np.linalg.norm(y):
            solver_skips += 1
        else:
            push_pair(hist, s, y)
        w = w + s
        f, g = f_new, g_new
        k += 1
        trace.append((k, f, float(np.max(np.abs(g))), alpha, 1))
    gnorm = float(np.max(np.abs(g))) if g.size else 0.0
    if status == "max_iter" and gnorm <= cfg.tol_g:
        status = "converged"
    return SolveReport(status=status, iterations=k, f_final=f, gnorm_final=gnorm,
                       f_evals=f_evals, g_evals=f_evals,
                       skip_count=hist.skip_count + solver_skips, trace=trace,
                       w_final=w)


def _tr_step(cd, g, delta, eps_pd):
    """Shifted step with ||s|| <= delta: minimal shift first, then a
    bisection on sigma when the unconstrained step leaves the region."""
    j, ksolve, gam = implicit_factors(cd)
    eig = implicit_eig(j, ksolve, gam)
    sigma = min_shift(eig, eps_pd)
    res = shifted_solve(cd, g, sigma, eig)
    if np.linalg.norm(res.s) <= delta:
        return res
    steps = 0
    lo = sigma
    hi = max(1.0, 2.0 * sigma)
    res_hi = shifted_solve(cd, g, hi, eig)
    steps += 1
    while np.linalg.norm(res_hi.s) > delta and steps < TR_BISECT_MAX:
        lo = hi
        hi *= 4.0
        res_hi = shifted_solve(cd, g, hi, eig)
        steps += 1
    while steps < TR_BISECT_MAX:
        mid = 0.5 * (lo + hi)
        res_mid = shifted_solve(cd, g, mid, eig)
        steps += 1
        if np.linalg.norm(res_mid.s) > delta:
            lo = mid
        else:
            hi = mid
            res_hi = res_mid
    return res_hi


def minimize_trustregion(problem, w0, cfg: SolverConfig | None = None) -> SolveReport:
    """Trust-region driver on the direct compact form.

    Every iteration factors the compact matrix implicitly, shifts it to
    positive definiteness, solves the shifted system within the radius,
    and applies the standard ratio test (accept at rho >= tr_eta,
    shrink x0.25 below rho = 0.25, double above 0.75 on near-boundary
    steps, radius clamped to [1e-12, 1e12]).
    """
    cfg = cfg or SolverConfig()
    w = np.asarray(w0, dtype=np.float64).copy()
    d = w.size
    # the eigendecomposition needs 2m <= d columns in J
    l_eff = max(1, min(cfg.l, d // 2))
    hist = LmHistory(d, l=l_eff, mode="direct", policy=cfg.policy)
    cd = CompactDirect(hist, form="general")
    f, g = problem.eval(w)
    f_evals = 1
    delta = cfg.tr_delta0
    trace = []
    status = "max_iter"
    k = 0
    while k < cfg.max_iter:
        gnorm = float(np.max(np.abs(g))) if g.size else 0.0
        if not (np.isfinite(f) and np.isfinite(g).all()):
            status = "numerical_fail"
            break
        if gnorm <= cfg.tol_g:
            status = "converged"
            break
        res = _tr_step(cd, g, delta, cfg.tr_eps_pd)
        s = res.s
        snorm = float(np.linalg.norm(s))
        model_decrease = -(float(g @ s) + 0.5 * float(s @ bv_product(cd, s)))
        f_trial, g_trial = problem.eval(w + s)
        f_evals += 1
        if model_decrease > 0.0 and np.isfinite(f_trial):
            rho = (f - f_trial) / model_decrease
        else:
            rho = -np.inf
        accepted = rho >= cfg.tr_eta
        if accepted:
            y = g_trial - g
            push_pair(hist, s, y)
            w = w + s
            f, g = f_trial, g_trial
        if rho < 0.25:
            delta = max(0.25 * delta, 1e-12)
        elif rho > 0.75 and snorm >= 0.9 * delta:
            delta = min(2.0 * delta, 1e12)
        k += 1
        trace.append((k, f, float(np.max(np.abs(g))), res.sigma, int(accepted)))
    gnorm = float(np.max(np.abs(g))) if g.size else 0.0
    if status == "max_iter" and gnorm <= cfg.tol_g:
        status = "converged"
    return SolveReport(status=status, iterations=k, f_final=f, gnorm_final=gnorm,
                       f_evals=f_evals, g_evals=f_evals,
                       skip_count=hist.skip_count, trace=trace, w_final=w)


STOCHASTIC_MODES = ("sgd", "compact-s", "compact-y")


def minimize_stochastic(problem, w0, cfg: SolverConfig | None = None,
                        mode: str = "compact-y") -> SolveReport:
    """Fixed-step mini-batch driver.

    Per step: one shuffled batch gradient, a step w + alpha p with
    p = -H g_batch (H = I in sgd mode), and for the compact modes a
    curvature pair from the gradient difference on the same batch.
    The history keeps a constant identity initialization. Trace rows
    are (epoch, train_loss, holdout_acc, alpha, 1).
    """
    cfg = cfg or SolverConfig()
    if mode not in STOCHASTIC_MODES:
        raise ValueError(f"unknown stochastic mode {mode!r}")
    rng = np.random.default_rng(cfg.seed)
    w = np.asarray(w0, dtype=np.float64).copy()
    d = w.size
    n = problem.n_train
    nb = max(1, math.ceil(n / cfg.batch_size))
    hist = None
    view = None
    if mode != "sgd":
        hist = LmHistory(d, l=cfg.l, mode="inverse",
                         policy=PairPolicy("s" if mode == "compact-s" else "y"),
                         gamma=1.0, adapt_gamma=False)
        view = CompactInverse(hist, form="general")
    f0, _ = problem.eval(w)
    f_evals = 1
    trace = []
    status = "max_iter"
    for epoch in range(1, cfg.epochs + 1):
        perm = rng.permutation(n)
        for jb in range(nb):
            idx = perm[jb * cfg.batch_size : (jb + 1) * cfg.batch_size]
            fb, gb = problem.batch_eval(w, idx)
            f_evals += 1
            if not (np.isfinite(fb) and np.isfinite(gb).all()):
                status = "numerical_fail"
                break
            p = -gb if mode == "sgd" else -hv_product(view, gb)
            w_new = w + cfg.alpha * p
            if mode != "sgd":
                s = cfg.alpha * p
                _, gb_new = problem.batch_eval(w_new, idx)
                f_evals += 1
                push_pair(hist, s, gb_new - gb)
            w = w_new
        if status == "numerical_fail":
            break
        floss, _ = problem.eval(w)
        f_evals += 1
        acc = problem.holdout_accuracy(w) if hasattr(problem, "holdout_accuracy") else float("nan")
        trace.append((epoch, floss, acc, cfg.alpha, 1))
    f_final, g_final = problem.eval(w)
    f_evals += 1
    if status != "numerical_fail":
        status = "converged" if f_final < f0 else "max_iter"
    return SolveReport(status=status, iterations=len(trace), f_final=f_final,
                       gnorm_final=float(np.max(np.abs(g_final))),
                       f_evals=f_evals, g_evals=f_evals,
                       skip_count=hist.skip_count if hist is not None else 0,
                       trace=trace, w_final=w)
