"""Benchmark command line.

Subcommands:

  verify     error table of a compact form against its dense recursion
  eig-bench  dense vs implicit eigendecomposition timings and errors
  minimize   line-search / trust-region run on a named problem
  tensor     batches of rank-r tensor fits, per-instance results
  logistic   stochastic multiclass regression on synthetic data

Every command writes a CSV artifact (UTF-8, LF line endings, header
row, shortest round-trip float formatting) and is deterministic for a
given flag set and seed, timing columns aside; ``--plot`` additionally
renders a PNG next to the CSV. A JSON file passed with ``--config``
supplies defaults that explicit flags override; unknown config keys
are rejected.

Exit codes: 0 success, 1 usage error, 2 verification tolerance breach,
3 non-convergence.
"""

from __future__ import annotations

import argparse
import json
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .compact_inverse import CompactInverse, implicit_factors
from .history import LmHistory, PairPolicy
from .problems import (CpFit, Multiclass, Rosenbrock,
                       make_synthetic_multiclass, read_tensor)
from .solvers import (SolverConfig, minimize_linesearch, minimize_stochastic,
                      minimize_trustregion)
from .spectral import implicit_eig
from .verification import VERIFY_MODES, error_rows

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_TOLERANCE = 2
EXIT_NO_CONVERGENCE = 3

VERIFY_TOL = 1e-10


class UsageError(Exception):
    pass


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _parse_dims(text):
    try:
        return tuple(int(p) for p in str(text).split(","))
    except ValueError as exc:
        raise UsageError(f"bad dimension list {text!r}") from exc


def _plot_path(out):
    return str(Path(out).with_suffix(".png"))


# ----------------------------------------------------------------------
# flag/config merging
# ----------------------------------------------------------------------

DEFAULTS = {
    "verify": {"d": 8, "k_max": 8, "mode": "greenstadt", "seed": 0,
               "out": "verify.csv", "plot": False},
    "eig-bench": {"d_list": "8,16,32,64", "l": 5, "iters": 10, "seed": 0,
                  "dense_cap": 2048, "repeats": 5, "out": "eig_bench.csv",
                  "plot": False},
    "minimize": {"problem": "rosenbrock", "d": 128, "strategy": "linesearch",
                 "policy": "s", "l": 5, "tol": 1e-5, "max_iter": 5000,
                 "seed": 0, "out": "minimize.csv", "plot": False},
    "tensor": {"dims": "10,10,10", "rank": 2, "n_instances": 50,
               "noise": 0.0, "l": 5, "restarts": 3, "max_iter": 2000,
               "seed": 0, "jobs": 1, "tensor_file": "", "out": "tensor.csv",
               "plot": False},
    "logistic": {"n": 12288, "p": 64, "n_classes": 10, "batch": 256,
                 "epochs": 10, "alpha": 0.5, "mode": "compact-y", "l": 1,
                 "separation": 0.5, "seed": 1, "out": "logistic.csv",
                 "plot": False},
}


def _merge_config(command, args) -> dict:
    """Effective options: defaults < config file < explicit flags."""
    merged = dict(DEFAULTS[command])
    config_path = getattr(args, "config", None)
    if config_path:
        try:
            with open(config_path, "r", encoding="utf-8") as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {config_path}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise UsageError("config must be a JSON object")
        unknown = set(loaded) - set(merged)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        merged.update(loaded)
    for key in merged:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            merged[key] = flag_value
    return merged


# ----------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------

def cmd_verify(opts) -> int:
    d, k_max = int(opts["d"]), int(opts["k_max"])
    if d < 1 or d > 2000:
        raise UsageError("d must be in 1..2000")
    if k_max < 0:
        raise UsageError("k_max must be >= 0")
    if opts["mode"] not in VERIFY_MODES:
        raise UsageError(f"mode must be one of {VERIFY_MODES}")
    rows = error_rows(opts["mode"], d, k_max, int(opts["seed"]))
    write_csv(opts["out"], ["k", "error1", "error2"], rows)
    if opts["plot"] and rows:
        from . import plotting
        plotting.save_verify_plot(rows, _plot_path(opts["out"]), opts["mode"])
    breach = any(r[1] > VERIFY_TOL or r[2] > VERIFY_TOL for r in rows)
    print(f"verify mode={opts['mode']} d={d} k_max={k_max}: "
          f"{'TOLERANCE BREACH' if breach else 'ok'} ({len(rows)} rows)")
    return EXIT_TOLERANCE if breach else EXIT_OK


def _median_time(fun, repeats):
    times = []
    for _ in range(max(1, repeats)):
        t0 = time.perf_counter()
        fun()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def cmd_eig_bench(opts) -> int:
    ds = _parse_dims(opts["d_list"])
    l = int(opts["l"])
    iters = int(opts["iters"])
    if l < 1:
        raise UsageError("l must be >= 1")
    if any(d < 2 or d % 2 for d in ds):
        raise UsageError("dimensions must be even and >= 2")
    repeats = int(opts["repeats"])
    rows = []
    for d in ds:
        problem = Rosenbrock(d)
        l_eff = max(1, min(l, d // 2))  # the factorization needs 2m <= d
        cfg = SolverConfig(l=l_eff, tol_g=1e-300, max_iter=max(iters, 0),
                           policy=PairPolicy("s"), seed=int(opts["seed"]))
        hist = LmHistory(d, l=l_eff, mode="inverse", policy=cfg.policy)
        minimize_linesearch(problem, problem.start(), cfg, history=hist)
        view = CompactInverse(hist, form="general")
        j, ksolve, spectral_gamma = implicit_factors(view)
        t_impl = _median_time(lambda: implicit_eig(j, ksolve, spectral_gamma), repeats)
        lam_impl = implicit_eig(j, ksolve, spectral_gamma).full_spectrum(d)
        if d <= int(opts["dense_cap"]):
            base = 1.0 / spectral_gamma
            h_dense = base * np.eye(d)
            if j.shape[1] > 0:
                h_dense += j @ ksolve(j.T)
            t_dense = _median_time(lambda: np.linalg.eigvalsh(h_dense), repeats)
            lam_dense = np.linalg.eigvalsh(h_dense)
            err = float(np.sqrt(np.sum((lam_dense - lam_impl) ** 2)) / d)
        else:
            t_dense = float("nan")
            err = float("nan")
        rows.append((d, t_dense, t_impl, err))
    write_csv(opts["out"], ["d", "t_dense_s", "t_implicit_s", "err"], rows)
    if opts["plot"] and rows:
        from . import plotting
        plotting.save_eig_bench_plot(rows, _plot_path(opts["out"]))
    for d, td, ti, err in rows:
        print(f"eig-bench d={d}: dense={td:.3e}s implicit={ti:.3e}s err={err:.3e}")
    _warn_timing_trend(rows)
    return EXIT_OK


def _warn_timing_trend(rows):
    big = [(r[0], r[2]) for r in rows if r[0] >= 1024]
    for (d0, t0), (d1, t1) in zip(big, big[1:]):
        if d1 == 2 * d0 and t0 > 0.0 and t1 / t0 > 2.5:
            print(f"warning: implicit-eig time ratio {t1 / t0:.2f} "
                  f"from d={d0} to d={d1} exceeds 2.5")


def cmd_minimize(opts) -> int:
    if opts["problem"] != "rosenbrock":
        raise UsageError(f"unknown problem {opts['problem']!r}")
    if opts["strategy"] not in ("linesearch", "trustregion"):
        raise UsageError("strategy must be 'linesearch' or 'trustregion'")
    if opts["policy"] not in ("s", "y"):
        raise UsageError("policy must be 's' or 'y'")
    d = int(opts["d"])
    problem = Rosenbrock(d)
    cfg = SolverConfig(l=int(opts["l"]), tol_g=float(opts["tol"]),
                       max_iter=int(opts["max_iter"]),
                       policy=PairPolicy(opts["policy"]), seed=int(opts["seed"]))
    solver = minimize_linesearch if opts["strategy"] == "linesearch" else minimize_trustregion
    report = solver(problem, problem.start(), cfg)
    write_csv(opts["out"], ["k", "f", "gnorm", "step", "accepted"], report.trace)
    if opts["plot"] and report.trace:
        from . import plotting
        plotting.save_trace_plot(report.trace, _plot_path(opts["out"]),
                                 f"{opts['problem']} d={d} ({opts['strategy']})")
    print(f"minimize {opts['problem']} d={d} {opts['strategy']} policy={opts['policy']}: "
          f"status={report.status} iters={report.iterations} "
          f"f={report.f_final:.6e} gnorm={report.gnorm_final:.3e} fevals={report.f_evals}")
    return EXIT_OK if report.status == "converged" else EXIT_NO_CONVERGENCE


def _fit_tensor_instance(packed):
    (instance, dims, rank, noise, l, restarts, max_iter, seed, tensor_file) = packed
    if tensor_file:
        data = read_tensor(tensor_file)
    else:
        rng = np.random.default_rng([seed, instance])
        factors = [rng.standard_normal((dim, rank)) for dim in dims]
        data = np.einsum("ir,jr,kr->ijk", *factors)
        if noise > 0.0:
            data = data + noise * rng.standard_normal(dims)
    problem = CpFit(data, rank)
    best = None
    total_evals = 0
    for restart in range(max(1, restarts)):
        rng_w = np.random.default_rng([seed, instance, restart])
        w0 = rng_w.standard_normal(problem.dim)
        cfg = SolverConfig(l=l, tol_g=1e-5, max_iter=max_iter,
                           policy=PairPolicy("s"), seed=seed)
        report = minimize_linesearch(problem, w0, cfg)
        total_evals += report.f_evals
        rel = problem.relative_error(report.w_final)
        cand = (report.f_final, rel, report.status == "converged")
        if best is None or cand[0] < best[0]:
            best = cand
    f_final, rel_err, converged = best
    return (instance, f_final, rel_err, total_evals, int(converged))


def cmd_tensor(opts) -> int:
    dims = _parse_dims(opts["dims"])
    if len(dims) != 3 or any(v < 1 for v in dims):
        raise UsageError("dims must be three positive integers")
    if dims[0] * dims[1] * dims[2] > 10**6:
        raise UsageError("total tensor size must be <= 1e6")
    rank = int(opts["rank"])
    if rank < 1:
        raise UsageError("rank must be >= 1")
    n_instances = 1 if opts["tensor_file"] else int(opts["n_instances"])
    if n_instances < 1:
        raise UsageError("n_instances must be >= 1")
    jobs = int(opts["jobs"])
    packed = [(i, dims, rank, float(opts["noise"]), int(opts["l"]),
               int(opts["restarts"]), int(opts["max_iter"]), int(opts["seed"]),
               opts["tensor_file"]) for i in range(n_instances)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_fit_tensor_instance, packed))
    else:
        rows = [_fit_tensor_instance(p) for p in packed]
    write_csv(opts["out"], ["instance", "f_final", "rel_err", "f_evals", "converged"], rows)
    if opts["plot"] and rows:
        from . import plotting
        plotting.save_tensor_plot(rows, _plot_path(opts["out"]))
    evals = sorted(r[3] for r in rows)
    frac = sum(r[4] for r in rows) / len(rows)
    print(f"tensor dims={'x'.join(map(str, dims))} rank={rank} instances={len(rows)}: "
          f"median f_evals={evals[len(evals) // 2]} fraction converged={frac:.2f}")
    return EXIT_OK


def cmd_logistic(opts) -> int:
    if opts["mode"] not in ("sgd", "compact-s", "compact-y"):
        raise UsageError("mode must be sgd, compact-s or compact-y")
    n, p, c = int(opts["n"]), int(opts["p"]), int(opts["n_classes"])
    if min(n, p, c) < 1:
        raise UsageError("n, p and classes must be >= 1")
    data = make_synthetic_multiclass(n, p, c, int(opts["seed"]),
                                     separation=float(opts["separation"]))
    problem = Multiclass(data)
    cfg = SolverConfig(l=int(opts["l"]), alpha=float(opts["alpha"]),
                       batch_size=int(opts["batch"]), epochs=int(opts["epochs"]),
                       seed=int(opts["seed"]))
    report = minimize_stochastic(problem, np.zeros(problem.dim), cfg, mode=opts["mode"])
    rows = [(r[0], r[1], r[2]) for r in report.trace]
    write_csv(opts["out"], ["epoch", "train_loss", "holdout_acc"], rows)
    if opts["plot"] and rows:
        from . import plotting
        plotting.save_logistic_plot(rows, _plot_path(opts["out"]), opts["mode"])
    print(f"logistic mode={opts['mode']} n={n} p={p} C={c}: status={report.status} "
          f"final_loss={report.f_final:.6f}")
    return EXIT_OK if report.status == "converged" else EXIT_NO_CONVERGENCE


# ----------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="compactqn", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command")

    def common(sp):
        sp.add_argument("--out", type=str, default=None, help="CSV output path")
        sp.add_argument("--seed", type=int, default=None, help="64-bit seed")
        sp.add_argument("--config", type=str, default=None,
                        help="JSON file with defaults; flags override")
        sp.add_argument("--plot", action="store_true", default=None,
                        help="render a PNG figure next to the CSV")

    sp = sub.add_parser("verify", help="compact forms vs dense recursions")
    sp.add_argument("--d", type=int, default=None)
    sp.add_argument("--k_max", "--k-max", dest="k_max", type=int, default=None)
    sp.add_argument("--mode", type=str, default=None, choices=VERIFY_MODES)
    common(sp)

    sp = sub.add_parser("eig-bench", help="implicit vs dense eigendecomposition")
    sp.add_argument("--d-list", dest="d_list", type=str, default=None)
    sp.add_argument("--l", type=int, default=None)
    sp.add_argument("--iters", type=int, default=None)
    sp.add_argument("--dense-cap", dest="dense_cap", type=int, default=None)
    sp.add_argument("--repeats", type=int, default=None)
    common(sp)

    sp = sub.add_parser("minimize", help="deterministic solver run")
    sp.add_argument("--problem", type=str, default=None)
    sp.add_argument("--d", type=int, default=None)
    sp.add_argument("--strategy", type=str, default=None)
    sp.add_argument("--policy", type=str, default=None)
    sp.add_argument("--l", type=int, default=None)
    sp.add_argument("--tol", type=float, default=None)
    sp.add_argument("--max-iter", dest="max_iter", type=int, default=None)
    common(sp)

    sp = sub.add_parser("tensor", help="rank-r tensor fitting sweep")
    sp.add_argument("--dims", type=str, default=None)
    sp.add_argument("--rank", type=int, default=None)
    sp.add_argument("--n-instances", dest="n_instances", type=int, default=None)
    sp.add_argument("--noise", type=float, default=None)
    sp.add_argument("--l", type=int, default=None)
    sp.add_argument("--restarts", type=int, default=None)
    sp.add_argument("--max-iter", dest="max_iter", type=int, default=None)
    sp.add_argument("--jobs", type=int, default=None)
    sp.add_argument("--tensor-file", dest="tensor_file", type=str, default=None)
    common(sp)

    sp = sub.add_parser("logistic", help="stochastic multiclass regression")
    sp.add_argument("--n", type=int, default=None)
    sp.add_argument("--p", type=int, default=None)
    sp.add_argument("--n-classes", dest="n_classes", type=int, default=None)
    sp.add_argument("--batch", type=int, default=None)
    sp.add_argument("--epochs", type=int, default=None)
    sp.add_argument("--alpha", type=float, default=None)
    sp.add_argument("--mode", type=str, default=None)
    sp.add_argument("--l", type=int, default=None)
    sp.add_argument("--separation", type=float, default=None)
    common(sp)

    return parser


COMMANDS = {
    "verify": cmd_verify,
    "eig-bench": cmd_eig_bench,
    "minimize": cmd_minimize,
    "tensor": cmd_tensor,
    "logistic": cmd_logistic,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    if not args.command:
        parser.print_usage()
        return EXIT_USAGE
    try:
        opts = _merge_config(args.command, args)
        return COMMANDS[args.command](opts)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
