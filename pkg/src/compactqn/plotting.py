"""Figure rendering for the CLI report path.

Each command can drop a PNG next to its CSV. Figures are rendered with
the Agg backend and a pinned Software tag so repeated runs produce
identical files.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

_SAVE_KW = {"dpi": 110, "metadata": {"Software": "compactqn"}}


def _finite(values):
    return [v for v in values if isinstance(v, (int, float)) and math.isfinite(v)]


def save_verify_plot(rows, path, mode):
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ks = [r[0] for r in rows]
    ax.semilogy(ks, [max(r[1], 1e-18) for r in rows], "o-", label="secant residual")
    ax.semilogy(ks, [max(r[2], 1e-18) for r in rows], "s-", label="vs dense recursion")
    ax.set_xlabel("k")
    ax.set_ylabel("error")
    ax.set_title(f"compact vs recursive updates ({mode})")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_eig_bench_plot(rows, path):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.6, 3.4))
    ds = [r[0] for r in rows]
    t_dense = [r[1] for r in rows]
    t_impl = [r[2] for r in rows]
    errs = [r[3] for r in rows]
    dense_pts = [(d, t) for d, t in zip(ds, t_dense) if math.isfinite(t)]
    if dense_pts:
        ax1.loglog([p[0] for p in dense_pts], [p[1] for p in dense_pts], "o-", label="dense eig")
    ax1.loglog(ds, t_impl, "s-", label="implicit eig")
    ax1.set_xlabel("d")
    ax1.set_ylabel("seconds")
    ax1.legend()
    err_pts = [(d, e) for d, e in zip(ds, errs) if math.isfinite(e)]
    if err_pts:
        ax2.loglog([p[0] for p in err_pts], [max(p[1], 1e-18) for p in err_pts], "d-")
    ax2.set_xlabel("d")
    ax2.set_ylabel("spectrum error")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_trace_plot(rows, path, title):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.6, 3.4))
    ks = [r[0] for r in rows]
    ax1.semilogy(ks, [max(r[1], 1e-18) for r in rows], "-")
    ax1.set_xlabel("iteration")
    ax1.set_ylabel("f")
    ax2.semilogy(ks, [max(r[2], 1e-18) for r in rows], "-")
    ax2.set_xlabel("iteration")
    ax2.set_ylabel("gradient norm (inf)")
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_tensor_plot(rows, path):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.6, 3.4))
    ax1.hist(_finite([r[1] for r in rows]), bins=20)
    ax1.set_xlabel("final objective")
    ax1.set_ylabel("count")
    ax2.hist(_finite([r[3] for r in rows]), bins=20)
    ax2.set_xlabel("function evaluations")
    ax2.set_ylabel("count")
    fig.suptitle("tensor fitting distributions")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_logistic_plot(rows, path, mode):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.6, 3.4))
    epochs = [r[0] for r in rows]
    ax1.plot(epochs, [r[1] for r in rows], "o-")
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("train loss")
    ax2.plot(epochs, [r[2] for r in rows], "o-")
    ax2.set_xlabel("epoch")
    ax2.set_ylabel("holdout accuracy")
    fig.suptitle(f"stochastic run ({mode})")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
