"""Limited-memory pair history with incrementally maintained Gram caches.

Keeps the most recent update pairs (s, y) together with one parameter
column p per pair: p plays the role of v for inverse-mode
representations and of c for direct mode. Column stores are fixed d x l
ring buffers addressed through a logical oldest-to-newest order, so
accepting a pair never moves d-length memory. The small Gram caches
(SᵀY plus the two mode-specific products) are refreshed with two
matrix-vector products per accepted pair instead of being recomputed
from scratch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NonFiniteInput, ZeroVector

GAMMA_MIN = 1e-8
GAMMA_MAX = 1e8

#: relative threshold on |pᵀy| (inverse mode) or |pᵀs| (direct mode)
#: below which a pair is rejected
EPS_PAIR = 1e-10


class _MultCounter:
    """Running count of floating-point multiplications in hot paths."""

    __slots__ = ("n",)

    def __init__(self):
        self.n = 0

    def add(self, k):
        self.n += k


@dataclass(frozen=True)
class PairPolicy:
    """Choice of the free parameter column stored with each pair.

    kind is "s" (v = s, the BFGS/PSB choice), "y" (v = y, Greenstadt),
    or "custom", in which case the caller supplies one d-vector per
    accepted pair.
    """

    kind: str = "s"

    def __post_init__(self):
        if self.kind not in ("s", "y", "custom"):
            raise ValueError("policy kind must be 's', 'y' or 'custom'")

    def resolve(self, s, y, custom=None):
        if self.kind == "s":
            return s
        if self.kind == "y":
            return y
        if custom is None:
            raise ValueError("custom policy requires an explicit parameter vector")
        return custom


class ColumnStore:
    """Ring buffer of up to l column vectors of length d.

    Pushing beyond capacity drops the oldest column by rotating a start
    index; the d x l block itself is never shifted. All reads are in
    logical order, oldest first.
    """

    def __init__(self, d, l, counter=None):
        self.d = d
        self.l = l
        self.data = np.zeros((d, l), order="F")
        self.m = 0
        self._start = 0
        self._counter = counter

    def _slots(self):
        if self.m < self.l:
            return np.arange(self.m)
        return (self._start + np.arange(self.l)) % self.l

    def push(self, v):
        if v.shape != (self.d,):
            raise DimensionMismatch(f"expected a vector of length {self.d}")
        if self.m < self.l:
            self.data[:, self.m] = v
            self.m += 1
        else:
            self.data[:, self._start] = v
            self._start = (self._start + 1) % self.l

    def column(self, j):
        """Logical column j (0 = oldest)."""
        return self.data[:, self._slots()[j]]

    def view(self):
        """The current columns as a d x m matrix in logical order (copy)."""
        return self.data[:, self._slots()]

    def dots(self, x):
        """All inner products columnᵀ x, logical order; one O(m d) product."""
        raw = self.data[:, : self.m].T @ x
        if self._counter is not None:
            self._counter.add(self.m * self.d)
        if self.m < self.l:
            return raw
        return raw[self._slots()]

    def combine(self, coeffs):
        """Linear combination of the columns, coeffs in logical order."""
        w = np.zeros(self.m)
        w[self._slots()] = coeffs
        if self._counter is not None:
            self._counter.add(self.m * self.d)
        return self.data[:, : self.m] @ w


def col_update(store: ColumnStore, v: np.ndarray) -> ColumnStore:
    """Append v; once at capacity the oldest column is dropped in place."""
    store.push(np.asarray(v, dtype=np.float64))
    return store


def prod_update(cache, x_store: ColumnStore, y_store: ColumnStore, x, y):
    """Refresh the Gram cache XᵀY after appending x to X and y to Y.

    ``cache`` must equal XᵀY for the stores before the append. Only the
    new row xᵀY and column Xᵀy are computed (one product when the cache
    is symmetric, i.e. the same store and vector on both sides); the
    retained block is reused, shifted up-left once capacity is reached.
    """
    m = x_store.m
    if cache.shape != (m, m):
        raise DimensionMismatch("cache shape does not match the store count")
    symmetric = x_store is y_store and x is y
    xty = x_store.dots(y)
    ytx = xty if symmetric else y_store.dots(x)
    xy = float(x @ y)
    full = m == x_store.l
    if not full:
        out = np.empty((m + 1, m + 1))
        out[:m, :m] = cache
        out[:m, m] = xty
        out[m, :m] = ytx
        out[m, m] = xy
    else:
        out = np.empty((m, m))
        out[: m - 1, : m - 1] = cache[1:, 1:]
        out[: m - 1, m - 1] = xty[1:]
        out[m - 1, : m - 1] = ytx[1:]
        out[m - 1, m - 1] = xy
    return out


def gamma_init(s, y, fallback=1.0):
    """Adaptive identity-initialization factor yᵀs / yᵀy.

    Clamped to [1e-8, 1e8]; returns ``fallback`` when the curvature yᵀs
    is not positive. Raises ZeroVector for y = 0.
    """
    y = np.asarray(y, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    yy = float(y @ y)
    if yy == 0.0:
        raise ZeroVector("gamma_init needs a nonzero gradient difference")
    ys = float(y @ s)
    if ys <= 0.0:
        return fallback
    return float(np.clip(ys / yy, GAMMA_MIN, GAMMA_MAX))


class LmHistory:
    """Limited-memory store of (s, y, p) columns and their Gram caches.

    mode "inverse" caches SᵀY, PᵀY and YᵀY; mode "direct" caches SᵀY,
    PᵀS and SᵀS. gamma scales the identity initialization: the inverse
    estimate starts from gamma I, the direct one from (1/gamma) I.

    Single writer: push_pair requires exclusive access. Reads between
    pushes are safe from any thread.
    """

    def __init__(self, d, l=5, mode="inverse", policy=None, gamma=1.0,
                 adapt_gamma=True, eps_pair=EPS_PAIR):
        if mode not in ("inverse", "direct"):
            raise ValueError("mode must be 'inverse' or 'direct'")
        if l < 1:
            raise ValueError("memory limit l must be >= 1")
        self.d = d
        self.l = l
        self.mode = mode
        self.policy = policy if policy is not None else PairPolicy("s")
        self.gamma = float(gamma)
        self.adapt_gamma = adapt_gamma
        self.eps_pair = eps_pair
        self.skip_count = 0
        self.mixed_policies = False
        self._counter = _MultCounter()
        self.s_store = ColumnStore(d, l, self._counter)
        self.y_store = ColumnStore(d, l, self._counter)
        self.p_store = ColumnStore(d, l, self._counter)
        # fixed l x l buffers; the logical m x m cache lives in the top left
        self._sy = np.zeros((l, l))
        self._pa = np.zeros((l, l))  # PᵀY (inverse) or PᵀS (direct)
        self._gg = np.zeros((l, l))  # YᵀY (inverse) or SᵀS (direct)

    @property
    def m(self):
        return self.s_store.m

    @property
    def mult_count(self):
        return self._counter.n

    def reset_mult_count(self):
        self._counter.n = 0

    def add_mults(self, k):
        self._counter.add(k)

    def sy(self):
        """Cached SᵀY, logical m x m view."""
        return self._sy[: self.m, : self.m]

    def pa(self):
        """Cached PᵀY (inverse mode) or PᵀS (direct mode)."""
        return self._pa[: self.m, : self.m]

    def gg(self):
        """Cached YᵀY (inverse mode) or SᵀS (direct mode)."""
        return self._gg[: self.m, : self.m]

    def clear(self):
        self.s_store = ColumnStore(self.d, self.l, self._counter)
        self.y_store = ColumnStore(self.d, self.l, self._counter)
        self.p_store = ColumnStore(self.d, self.l, self._counter)
        self._sy[:] = 0.0
        self._pa[:] = 0.0
        self._gg[:] = 0.0


def push_pair(h: LmHistory, s, y, policy=None, custom=None) -> bool:
    """Offer a pair to the history; returns True when it was accepted.

    The pair is rejected (history bytes untouched, skip_count bumped)
    when |pᵀy| < eps_pair ||p|| ||y|| in inverse mode, or the analogous
    test against s in direct mode, which would make the coupling
    triangle singular.
    """
    s = np.asarray(s, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if s.shape != (h.d,) or y.shape != (h.d,):
        raise DimensionMismatch(f"pair vectors must have length {h.d}")
    if not (np.isfinite(s).all() and np.isfinite(y).all()):
        raise NonFiniteInput("pair vectors must be finite")
    pol = policy if policy is not None else h.policy
    if policy is not None and policy.kind != h.policy.kind:
        h.mixed_policies = True
    p = np.asarray(pol.resolve(s, y, custom), dtype=np.float64)
    if p.shape != (h.d,):
        raise DimensionMismatch("parameter vector must match the dimension")
    if not np.isfinite(p).all():
        raise NonFiniteInput("parameter vector must be finite")

    partner = y if h.mode == "inverse" else s
    coupling = abs(float(p @ partner))
    if not coupling > 0.0 or coupling < h.eps_pair * np.linalg.norm(p) * np.linalg.norm(partner):
        h.skip_count += 1
        return False

    m_new = min(h.m + 1, h.l)
    h._sy[:m_new, :m_new] = prod_update(h.sy(), h.s_store, h.y_store, s, y)
    if h.mode == "inverse":
        h._pa[:m_new, :m_new] = prod_update(h.pa(), h.p_store, h.y_store, p, y)
        h._gg[:m_new, :m_new] = prod_update(h.gg(), h.y_store, h.y_store, y, y)
    else:
        h._pa[:m_new, :m_new] = prod_update(h.pa(), h.p_store, h.s_store, p, s)
        h._gg[:m_new, :m_new] = prod_update(h.gg(), h.s_store, h.s_store, s, s)
    col_update(h.s_store, s)
    col_update(h.y_store, y)
    col_update(h.p_store, p)
    if h.adapt_gamma and float(y @ y) > 0.0:
        h.gamma = gamma_init(s, y, fallback=h.gamma)
    return True
