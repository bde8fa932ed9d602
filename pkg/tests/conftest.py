import numpy as np
import pytest

from compactqn.history import LmHistory, PairPolicy, push_pair


def draw_pair(rng, d, positive_curvature=False, guard=1e-3):
    """Random (s, y) with a relative coupling guard, resampled until safe."""
    while True:
        s = rng.standard_normal(d)
        y = rng.standard_normal(d)
        bound = guard * np.linalg.norm(s) * np.linalg.norm(y)
        sy = float(s @ y)
        if positive_curvature:
            if sy > bound:
                return s, y
        elif abs(sy) > bound:
            return s, y


def draw_param(rng, d, partner, guard=1e-3):
    while True:
        v = rng.standard_normal(d)
        if abs(float(v @ partner)) >= guard * np.linalg.norm(v) * np.linalg.norm(partner):
            return v


def build_history(d, k, seed, mode="inverse", policy_kind="s", l=None,
                  gamma=1.0, adapt_gamma=False, positive_curvature=None):
    """History filled with k seeded random pairs, plus the raw pair list."""
    rng = np.random.default_rng(seed)
    if positive_curvature is None:
        positive_curvature = policy_kind == "s" and mode == "inverse"
    h = LmHistory(d, l=l if l is not None else max(k, 1), mode=mode,
                  policy=PairPolicy(policy_kind), gamma=gamma,
                  adapt_gamma=adapt_gamma)
    pairs = []
    for _ in range(k):
        s, y = draw_pair(rng, d, positive_curvature)
        partner = y if mode == "inverse" else s
        custom = draw_param(rng, d, partner) if policy_kind == "custom" else None
        assert push_pair(h, s, y, custom=custom)
        p = {"s": s, "y": y, "custom": custom}[policy_kind]
        pairs.append((s, y, p))
    return h, pairs


@pytest.fixture
def rng():
    return np.random.default_rng(0)
