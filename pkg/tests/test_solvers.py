import numpy as np
import pytest

from compactqn.errors import LineSearchFail
from compactqn.history import PairPolicy
from compactqn.problems import (Multiclass, Rosenbrock,
                                make_synthetic_multiclass)
from compactqn.solvers import (SolverConfig, minimize_linesearch,
                               minimize_stochastic, minimize_trustregion,
                               wolfe_linesearch)


class Quadratic:
    """f(w) = 1/2 wᵀ A w for SPD or indefinite A."""

    def __init__(self, a):
        self.a = np.asarray(a, dtype=np.float64)
        self.dim = self.a.shape[0]

    def eval(self, w):
        g = self.a @ w
        return 0.5 * float(w @ g), g


class TestSolverConfig:
    def test_wolfe_constants_validated(self):
        with pytest.raises(ValueError):
            SolverConfig(wolfe_c1=0.95, wolfe_c2=0.9)
        with pytest.raises(ValueError):
            SolverConfig(tol_g=0.0)


class TestWolfeLinesearch:
    def test_unit_step_on_sphere(self):
        prob = Quadratic(np.eye(4))
        w = np.zeros(4)
        w[0] = 1.0
        f0, g0 = prob.eval(w)
        p = -w
        alpha, f_new, g_new, evals = wolfe_linesearch(prob, w, p, f0, g0,
                                                      SolverConfig())
        assert alpha == 1.0
        assert f_new == 0.0
        assert evals >= 1

    def test_certificate_on_anisotropic_quadratic(self):
        cfg = SolverConfig()
        prob = Quadratic(np.diag([1.0, 100.0]))
        w = np.array([1.0, 1.0])
        f0, g0 = prob.eval(w)
        p = -g0
        alpha, f_new, g_new, _ = wolfe_linesearch(prob, w, p, f0, g0, cfg)
        gd0 = p @ g0
        assert f_new <= f0 + cfg.wolfe_c1 * alpha * gd0
        assert abs(p @ g_new) <= cfg.wolfe_c2 * abs(gd0)

    def test_non_descent_rejected(self):
        prob = Quadratic(np.eye(2))
        w = np.ones(2)
        f0, g0 = prob.eval(w)
        with pytest.raises(ValueError):
            wolfe_linesearch(prob, w, g0, f0, g0, SolverConfig())

    def test_eval_budget(self):
        # a function whose curvature condition is impossible to satisfy
        class Nasty:
            dim = 1

            def eval(self, w):
                return float(np.abs(w[0])), np.array([np.sign(w[0]) or 1.0])

        prob = Nasty()
        f0, g0 = prob.eval(np.array([1.0]))
        with pytest.raises(LineSearchFail):
            wolfe_linesearch(prob, np.array([1.0]), np.array([-1.0]), f0, g0,
                             SolverConfig(wolfe_c2=1e-12, wolfe_c1=1e-13))


class TestMinimizeLinesearch:
    def test_sphere_quick_convergence(self):
        prob = Quadratic(np.eye(10))
        report = minimize_linesearch(prob, np.ones(10), SolverConfig())
        assert report.status == "converged"
        assert report.iterations <= 3
        assert report.gnorm_final <= 1e-5

    @pytest.mark.parametrize("d", [8, 16, 64, 256])
    def test_rosenbrock_within_eval_budget(self, d):
        prob = Rosenbrock(d)
        report = minimize_linesearch(prob, prob.start(), SolverConfig(max_iter=5000))
        assert report.status == "converged"
        assert report.gnorm_final <= 1e-5
        assert report.f_evals <= 10 * d

    def test_rosenbrock_greenstadt_policy(self):
        prob = Rosenbrock(64)
        report = minimize_linesearch(prob, prob.start(),
                                     SolverConfig(max_iter=5000,
                                                  policy=PairPolicy("y")))
        assert report.status == "converged"
        assert report.gnorm_final <= 1e-5

    def test_monotone_decrease(self):
        prob = Rosenbrock(32)
        report = minimize_linesearch(prob, prob.start(), SolverConfig(max_iter=5000))
        fs = [row[1] for row in report.trace]
        assert all(b < a for a, b in zip(fs, fs[1:]))

    def test_trace_shape_and_counts(self):
        prob = Quadratic(np.diag(np.linspace(1, 30, 12)))
        report = minimize_linesearch(prob, np.ones(12), SolverConfig())
        assert len(report.trace) == report.iterations
        assert report.f_evals >= report.iterations
        assert report.w_final is not None


class TestMinimizeTrustregion:
    def test_sphere_one_full_step(self):
        prob = Quadratic(np.eye(6))
        report = minimize_trustregion(prob, 0.5 * np.ones(6),
                                      SolverConfig(tr_delta0=100.0))
        assert report.status == "converged"
        assert report.iterations <= 3

    def test_random_spd_quadratic(self):
        rng = np.random.default_rng(7)
        m = rng.standard_normal((20, 20))
        prob = Quadratic(m @ m.T + np.eye(20))
        report = minimize_trustregion(prob, rng.standard_normal(20),
                                      SolverConfig(max_iter=500))
        assert report.status == "converged"
        assert report.gnorm_final <= 1e-5

    def test_indefinite_saddle_progress(self):
        a = np.diag(np.concatenate([np.linspace(1, 5, 8), -np.linspace(1, 3, 8)]))
        rng = np.random.default_rng(3)
        prob = Quadratic(a)
        report = minimize_trustregion(prob, 1e-3 * rng.standard_normal(16),
                                      SolverConfig(max_iter=60))
        accepted = [row for row in report.trace if row[4]]
        fs = [row[1] for row in accepted]
        assert all(b < a for a, b in zip(fs, fs[1:]))
        assert any(row[3] > 0 for row in accepted)  # positive shifts used
        assert report.f_final < 0.0  # escaped the saddle

    @pytest.mark.parametrize("d", [8, 64])
    def test_rosenbrock(self, d):
        prob = Rosenbrock(d)
        report = minimize_trustregion(prob, prob.start(),
                                      SolverConfig(max_iter=5000))
        assert report.status == "converged"
        assert report.gnorm_final <= 1e-5

    def test_radius_feasibility(self):
        prob = Rosenbrock(16)
        cfg = SolverConfig(max_iter=200)
        report = minimize_trustregion(prob, prob.start(), cfg)
        assert report.status == "converged"
        assert len(report.trace) == report.iterations


class TestMinimizeStochastic:
    def _problem(self, seed=0, n=1200, p=8, c=2, sep=4.0):
        data = make_synthetic_multiclass(n, p, c, seed, separation=sep)
        return Multiclass(data)

    def test_zero_step_keeps_loss_constant(self):
        prob = self._problem()
        cfg = SolverConfig(alpha=0.0, epochs=3, batch_size=128, l=1, seed=0)
        report = minimize_stochastic(prob, np.zeros(prob.dim), cfg, mode="sgd")
        losses = [row[1] for row in report.trace]
        assert losses[0] == losses[-1]
        assert report.status != "converged"

    def test_sgd_decreases_on_separable_data(self):
        prob = self._problem(sep=5.0)
        cfg = SolverConfig(alpha=0.5, epochs=5, batch_size=128, l=1, seed=1)
        report = minimize_stochastic(prob, np.zeros(prob.dim), cfg, mode="sgd")
        losses = [row[1] for row in report.trace]
        assert all(b < a for a, b in zip(losses, losses[1:]))
        assert report.status == "converged"

    @pytest.mark.parametrize("mode", ["compact-s", "compact-y"])
    def test_compact_modes_run_and_decrease(self, mode):
        prob = self._problem(seed=2, c=4, sep=1.0)
        cfg = SolverConfig(alpha=0.5, epochs=5, batch_size=128, l=1, seed=2)
        report = minimize_stochastic(prob, np.zeros(prob.dim), cfg, mode=mode)
        assert report.status == "converged"
        assert report.trace[-1][1] < report.trace[0][1]

    def test_reproducible_trace_bytes(self):
        prob = self._problem(seed=3)
        cfg = SolverConfig(alpha=0.5, epochs=3, batch_size=256, l=1, seed=9)
        a = minimize_stochastic(prob, np.zeros(prob.dim), cfg, mode="compact-y")
        b = minimize_stochastic(prob, np.zeros(prob.dim), cfg, mode="compact-y")
        assert repr(a.trace).encode() == repr(b.trace).encode()

    def test_epoch_count_and_batches(self):
        prob = self._problem(n=600)
        cfg = SolverConfig(alpha=0.1, epochs=4, batch_size=256, l=1, seed=0)
        report = minimize_stochastic(prob, np.zeros(prob.dim), cfg, mode="sgd")
        assert report.iterations == 4
        assert len(report.trace) == 4
        # ceil(500 / 256) = 2 batches per epoch plus per-epoch full loss
        assert report.f_evals >= 4 * 2

    def test_unknown_mode(self):
        prob = self._problem()
        with pytest.raises(ValueError):
            minimize_stochastic(prob, np.zeros(prob.dim), SolverConfig(),
                                mode="adam")

    def test_skip_accounting(self):
        # alpha = 0 with compact-s produces zero steps, all pairs skipped
        prob = self._problem(n=600)
        cfg = SolverConfig(alpha=0.0, epochs=2, batch_size=256, l=1, seed=0)
        report = minimize_stochastic(prob, np.zeros(prob.dim), cfg, mode="compact-s")
        assert report.skip_count == 2 * 2  # every batch pair rejected


class TestTrustRegionSubproblem:
    def test_step_feasibility_and_shift(self):
        from compactqn.compact_direct import CompactDirect, materialize_b
        from compactqn.history import LmHistory, PairPolicy, push_pair
        from compactqn.solvers import _tr_step
        rng = np.random.default_rng(31)
        h = LmHistory(18, l=4, mode="direct", policy=PairPolicy("s"),
                      gamma=1.0, adapt_gamma=False)
        for _ in range(4):
            while True:
                s, y = rng.standard_normal(18), rng.standard_normal(18)
                if abs(s @ y) > 0.1 * np.linalg.norm(s) * np.linalg.norm(y):
                    break
            push_pair(h, s, y)
        cd = CompactDirect(h)
        bmat = materialize_b(cd)
        g = rng.standard_normal(18)
        for delta in (1e-3, 0.1, 1.0, 100.0):
            res = _tr_step(cd, g, delta, 1e-8)
            assert np.linalg.norm(res.s) <= (1.0 + 1e-10) * delta
            lam = np.linalg.eigvalsh(bmat + res.sigma * np.eye(18))
            assert lam.min() >= -1e-10


class TestLargeRosenbrockBudget:
    @pytest.mark.parametrize("d", [1024, 8192])
    def test_eval_budget_scales(self, d):
        prob = Rosenbrock(d)
        report = minimize_linesearch(prob, prob.start(), SolverConfig(max_iter=5000))
        assert report.status == "converged"
        assert report.f_evals <= 10 * d
