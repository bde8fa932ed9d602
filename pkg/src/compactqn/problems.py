"""Objective/gradient implementations for the benchmark problems.

Three problems: the even Rosenbrock chain, mean multiclass softmax
logistic loss over synthetic Gaussian class data, and rank-r
three-way tensor fitting with the half-squared Frobenius misfit.
All gradients are analytic and checked against central finite
differences in the test suite.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import LabelOutOfRange, OddDimension, ShapeMismatch

TENSOR_MAGIC = b"CPT1"


# ----------------------------------------------------------------------
# even Rosenbrock
# ----------------------------------------------------------------------

def rosenbrock_eval(w: np.ndarray) -> tuple[float, np.ndarray]:
    """f = sum over pairs of 100 (w_odd^2 - w_even)^2 + (w_odd - 1)^2.

    Pairs are (w[0], w[1]), (w[2], w[3]), ...; the dimension must be
    even. Global minimum f = 0 at the all-ones vector.
    """
    w = np.asarray(w, dtype=np.float64)
    if w.size % 2 != 0:
        raise OddDimension("even Rosenbrock needs an even dimension")
    a = w[0::2]
    b = w[1::2]
    t = a * a - b
    f = float(np.sum(100.0 * t * t + (a - 1.0) ** 2))
    g = np.empty_like(w)
    g[0::2] = 400.0 * a * t + 2.0 * (a - 1.0)
    g[1::2] = -200.0 * t
    return f, g


class Rosenbrock:
    def __init__(self, d: int):
        if d % 2 != 0:
            raise OddDimension("even Rosenbrock needs an even dimension")
        self.dim = d

    def eval(self, w):
        return rosenbrock_eval(w)

    def start(self):
        """Conventional alternating start (-1.2, 1, -1.2, 1, ...)."""
        w0 = np.ones(self.dim)
        w0[0::2] = -1.2
        return w0


# ----------------------------------------------------------------------
# multiclass softmax regression
# ----------------------------------------------------------------------

@dataclass
class MulticlassData:
    """Feature matrix, integer labels and a train/holdout split."""

    x: np.ndarray
    labels: np.ndarray
    n_classes: int
    n_train: int

    def __post_init__(self):
        if self.labels.min() < 0 or self.labels.max() >= self.n_classes:
            raise LabelOutOfRange("labels must lie in 0..C-1")

    @property
    def n_features(self):
        return self.x.shape[1]

    def train(self):
        return self.x[: self.n_train], self.labels[: self.n_train]

    def holdout(self):
        return self.x[self.n_train :], self.labels[self.n_train :]


def multiclass_eval(data: MulticlassData, w: np.ndarray, batch=None) -> tuple[float, np.ndarray]:
    """Mean softmax cross-entropy and gradient over a batch of rows.

    w flattens the C x p weight matrix row-major. The log-sum-exp is
    stabilized by subtracting the per-sample maximum score. ``batch``
    is an index array into the training rows; None means all of them.
    """
    xtr, ytr = data.train()
    if batch is not None:
        xtr = xtr[batch]
        ytr = ytr[batch]
    c, p = data.n_classes, data.n_features
    if w.size != c * p:
        raise ShapeMismatch(f"expected {c * p} parameters")
    wm = w.reshape(c, p)
    scores = xtr @ wm.T
    shift = scores - scores.max(axis=1, keepdims=True)
    exps = np.exp(shift)
    z = exps.sum(axis=1)
    n = xtr.shape[0]
    f = float(np.mean(np.log(z) - shift[np.arange(n), ytr]))
    soft = exps / z[:, None]
    soft[np.arange(n), ytr] -= 1.0
    grad = (soft.T @ xtr) / n
    return f, grad.ravel()


def multiclass_accuracy(data: MulticlassData, w: np.ndarray, holdout=True) -> float:
    xs, ys = data.holdout() if holdout else data.train()
    wm = w.reshape(data.n_classes, data.n_features)
    pred = np.argmax(xs @ wm.T, axis=1)
    return float(np.mean(pred == ys))


def make_synthetic_multiclass(n, p, c, seed, separation=0.5) -> MulticlassData:
    """Gaussian class clusters with unit noise and balanced labels.

    Class centers are separation-scaled standard normals; 5/6 of the
    rows form the training split and the rest the holdout. Deterministic
    per seed.
    """
    rng = np.random.default_rng(seed)
    centers = separation * rng.standard_normal((c, p))
    labels = rng.permutation(np.arange(n) % c)
    x = centers[labels] + rng.standard_normal((n, p))
    n_train = (5 * n) // 6
    return MulticlassData(x=x, labels=labels, n_classes=c, n_train=n_train)


class Multiclass:
    """Softmax regression problem over one dataset split."""

    def __init__(self, data: MulticlassData):
        self.data = data
        self.dim = data.n_classes * data.n_features
        self.n_train = data.n_train

    def eval(self, w):
        return multiclass_eval(self.data, w)

    def batch_eval(self, w, batch):
        return multiclass_eval(self.data, w, batch=batch)

    def holdout_accuracy(self, w):
        return multiclass_accuracy(self.data, w, holdout=True)


# ----------------------------------------------------------------------
# CP tensor fitting
# ----------------------------------------------------------------------

@dataclass
class CpModel:
    """Rank-r model for a three-way tensor; factors flattened into w."""

    shape: tuple[int, int, int]
    rank: int

    def __post_init__(self):
        if len(self.shape) != 3:
            raise ShapeMismatch("only three-way tensors are supported")
        if self.rank < 1:
            raise ValueError("rank must be >= 1")

    @property
    def dim(self):
        return sum(self.shape) * self.rank

    def unpack(self, w):
        d1, d2, d3 = self.shape
        r = self.rank
        if w.size != self.dim:
            raise ShapeMismatch(f"expected {self.dim} parameters")
        a = w[: d1 * r].reshape(d1, r)
        b = w[d1 * r : (d1 + d2) * r].reshape(d2, r)
        c = w[(d1 + d2) * r :].reshape(d3, r)
        return a, b, c

    def pack(self, a, b, c):
        return np.concatenate([a.ravel(), b.ravel(), c.ravel()])

    def reconstruct(self, w):
        a, b, c = self.unpack(w)
        return np.einsum("ir,jr,kr->ijk", a, b, c)


def cp_eval(model: CpModel, data_tensor: np.ndarray, w: np.ndarray) -> tuple[float, np.ndarray]:
    """Half-squared Frobenius misfit and its gradient.

    f = 1/2 ||data - sum_r a_r x b_r x c_r||_F^2. The factor gradients
    are the matricized residual times the Khatri-Rao product of the
    other two factors, evaluated here with einsum contractions.
    """
    if data_tensor.shape != model.shape:
        raise ShapeMismatch("data tensor shape does not match the model")
    a, b, c = model.unpack(np.asarray(w, dtype=np.float64))
    resid = np.einsum("ir,jr,kr->ijk", a, b, c) - data_tensor
    f = 0.5 * float(np.sum(resid * resid))
    ga = np.einsum("ijk,jr,kr->ir", resid, b, c)
    gb = np.einsum("ijk,ir,kr->jr", resid, a, c)
    gc = np.einsum("ijk,ir,jr->kr", resid, a, b)
    return f, model.pack(ga, gb, gc)


def cp_relative_error(model: CpModel, data_tensor: np.ndarray, w: np.ndarray) -> float:
    """Frobenius misfit relative to the data norm."""
    resid = model.reconstruct(w) - data_tensor
    denom = np.linalg.norm(data_tensor)
    return float(np.linalg.norm(resid) / denom) if denom > 0 else float(np.linalg.norm(resid))


class CpFit:
    def __init__(self, data_tensor: np.ndarray, rank: int):
        self.model = CpModel(shape=tuple(data_tensor.shape), rank=rank)
        self.data = np.asarray(data_tensor, dtype=np.float64)
        self.dim = self.model.dim

    def eval(self, w):
        return cp_eval(self.model, self.data, w)

    def relative_error(self, w):
        return cp_relative_error(self.model, self.data, w)


# ----------------------------------------------------------------------
# tensor file format
# ----------------------------------------------------------------------

def write_tensor(path, tensor: np.ndarray) -> None:
    """Write a three-way tensor: magic "CPT1", u32 order (= 3), three
    u32 dims, then float64 values column-major, all little-endian."""
    tensor = np.asarray(tensor, dtype=np.float64)
    if tensor.ndim != 3:
        raise ShapeMismatch("tensor files hold three-way tensors")
    with open(path, "wb") as fh:
        fh.write(TENSOR_MAGIC)
        fh.write(struct.pack("<I", 3))
        fh.write(struct.pack("<3I", *tensor.shape))
        fh.write(tensor.ravel(order="F").astype("<f8").tobytes())


def read_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != TENSOR_MAGIC:
            raise ValueError("not a CPT1 tensor file")
        (order,) = struct.unpack("<I", fh.read(4))
        if order != 3:
            raise ShapeMismatch("tensor files hold three-way tensors")
        dims = struct.unpack("<3I", fh.read(12))
        count = dims[0] * dims[1] * dims[2]
        raw = fh.read(8 * count)
        if len(raw) != 8 * count:
            raise ValueError("truncated tensor file")
        flat = np.frombuffer(raw, dtype="<f8")
    return flat.reshape(dims, order="F").copy()


def finite_difference_gradient(fun, w, h_scale=1e-6):
    """Central finite differences of a scalar function; test oracle."""
    w = np.asarray(w, dtype=np.float64)
    g = np.zeros_like(w)
    for i in range(w.size):
        h = h_scale * max(1.0, abs(w[i]))
        wp = w.copy()
        wp[i] += h
        wm = w.copy()
        wm[i] -= h
        g[i] = (fun(wp) - fun(wm)) / (2.0 * h)
    return g
