"""L2-regularized logistic regression: objective, gradients, variance-reduced updates.

All functions here are pure; they are safe to call from any number of workers
as long as the inputs are not mutated concurrently.  The objective is the
averaged form

    f(w) = (1/n) sum_i log(1 + exp(-y_i x_i^T w)) + (lam/2) ||w||^2

and per-instance losses f_i(w) = log(1 + exp(-y_i x_i^T w)) + (lam/2)||w||^2,
so f = (1/n) sum_i f_i.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.special import expit


@dataclass(frozen=True)
class SparseExample:
    """One labeled instance: sorted sparse features plus a +/-1 label."""

    indices: np.ndarray  # int64, strictly increasing, >= 0
    vals: np.ndarray     # float64, aligned with indices
    label: int           # +1 or -1

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        vals = np.asarray(self.vals, dtype=np.float64)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "vals", vals)
        if idx.shape != vals.shape or idx.ndim != 1:
            raise ValueError("indices and vals must be 1-d and aligned")
        if idx.size and (np.any(np.diff(idx) <= 0) or idx[0] < 0):
            raise ValueError("feature indices must be strictly increasing and non-negative")
        if self.label not in (1, -1):
            raise ValueError(f"label must be +1 or -1, got {self.label!r}")


class Dataset:
    """Immutable sparse design matrix (CSR layout) with +/-1 labels.

    Stored as flat CSR arrays for fast per-row access in inner loops; a
    scipy CSR view is built lazily for vectorized whole-dataset operations.
    """

    def __init__(self, indptr, col_indices, values, labels, dim):
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.col_indices = np.asarray(col_indices, dtype=np.int64)
        self.values = np.asarray(values, dtype=np.float64)
        self.labels = np.asarray(labels, dtype=np.float64)
        self.dim = int(dim)
        self.n = len(self.labels)
        if self.n < 1 or self.dim < 1:
            raise ValueError("dataset needs n >= 1 and dim >= 1")
        if len(self.indptr) != self.n + 1:
            raise ValueError("indptr length must be n + 1")
        if self.col_indices.size and self.col_indices.max() >= self.dim:
            raise ValueError("feature index exceeds dataset dimension")
        if not np.all(np.isin(self.labels, (1.0, -1.0))):
            raise ValueError("labels must be +1 or -1")
        self._csr = None
        self._row_sq_norms = None

    @classmethod
    def from_examples(cls, examples, dim=None):
        if not examples:
            raise ValueError("dataset needs at least one example")
        max_seen = max((int(ex.indices[-1]) for ex in examples if ex.indices.size), default=-1)
        if dim is None:
            dim = max_seen + 1 if max_seen >= 0 else 1
        elif max_seen >= dim:
            raise ValueError(f"example index {max_seen} exceeds pinned dim {dim}")
        indptr = np.zeros(len(examples) + 1, dtype=np.int64)
        for i, ex in enumerate(examples):
            indptr[i + 1] = indptr[i] + ex.indices.size
        col = np.concatenate([ex.indices for ex in examples]) if indptr[-1] else np.zeros(0, np.int64)
        vals = np.concatenate([ex.vals for ex in examples]) if indptr[-1] else np.zeros(0, np.float64)
        labels = np.array([ex.label for ex in examples], dtype=np.float64)
        return cls(indptr, col, vals, labels, dim)

    def example(self, i):
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return SparseExample(self.col_indices[lo:hi].copy(), self.values[lo:hi].copy(),
                             int(self.labels[i]))

    @property
    def matrix(self):
        if self._csr is None:
            self._csr = sp.csr_matrix(
                (self.values, self.col_indices, self.indptr), shape=(self.n, self.dim))
        return self._csr

    @property
    def row_sq_norms(self):
        if self._row_sq_norms is None:
            sq = self.matrix.multiply(self.matrix)
            self._row_sq_norms = np.asarray(sq.sum(axis=1)).ravel()
        return self._row_sq_norms

    @property
    def nnz(self):
        return int(self.indptr[-1])

    def content_hash(self):
        import hashlib

        h = hashlib.sha256()
        for arr in (self.indptr, self.col_indices, self.values, self.labels):
            h.update(np.ascontiguousarray(arr).tobytes())
        h.update(str(self.dim).encode())
        return h.hexdigest()


@dataclass(frozen=True)
class LossConstants:
    """Problem constants: smoothness L, strong convexity mu, regularizer lam."""

    smoothness: float
    strong_convexity: float
    regularizer: float

    def __post_init__(self):
        if not (0 < self.strong_convexity <= self.smoothness):
            raise ValueError("need 0 < mu <= L")


def _check_dim(data: Dataset, w: np.ndarray):
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (data.dim,):
        raise ValueError(f"parameter shape {w.shape} does not match dataset dim {data.dim}")
    return w


def objective(data: Dataset, w: np.ndarray, lam: float) -> float:
    """f(w) = (1/n) sum_i softplus(-y_i x_i^T w) + (lam/2)||w||^2.

    Softplus is evaluated via logaddexp, stable for margins up to ~1e308.
    """
    w = _check_dim(data, w)
    if lam < 0:
        raise ValueError("lam must be >= 0")
    z = -data.labels * (data.matrix @ w)
    val = float(np.mean(np.logaddexp(0.0, z))) + 0.5 * lam * float(w @ w)
    if not np.isfinite(val):
        raise ValueError("objective is not finite")
    return val


def gradient_example(data: Dataset, i: int, w: np.ndarray, lam: float) -> np.ndarray:
    """grad f_i(w) = -y_i sigma(-y_i x_i^T w) x_i + lam w, returned dense.

    This is the canonical per-instance gradient used by every solver path;
    the sequential baseline, the simulator and the live engine all share it
    so that their trajectories can be compared bitwise.
    """
    lo, hi = data.indptr[i], data.indptr[i + 1]
    idx = data.col_indices[lo:hi]
    vals = data.values[lo:hi]
    y = data.labels[i]
    z = float(vals @ w[idx]) if idx.size else 0.0
    coef = -y * float(expit(-y * z))
    g = lam * w
    if idx.size:
        g[idx] += coef * vals
    return g


def grad_component(ex: SparseExample, w: np.ndarray, lam: float) -> np.ndarray:
    """Per-instance gradient from a standalone example (dense output)."""
    w = np.asarray(w, dtype=np.float64)
    if ex.indices.size and ex.indices[-1] >= w.shape[0]:
        raise ValueError("example index exceeds parameter dimension")
    y = float(ex.label)
    z = float(ex.vals @ w[ex.indices]) if ex.indices.size else 0.0
    coef = -y * float(expit(-y * z))
    g = lam * w
    if ex.indices.size:
        g[ex.indices] += coef * ex.vals
    return g


def full_gradient(data: Dataset, w: np.ndarray, lam: float, partition=None) -> np.ndarray:
    """(1/n) sum_i grad f_i(w), accumulated in index-ascending order.

    The explicit loop keeps the summation order fixed, so repeated calls are
    bitwise reproducible and the partitioned merge contract is simple: the
    per-block partial sums (each accumulated ascending within its block) are
    added in block order.  With ``partition=None`` a single block {0..n-1}
    is used.
    """
    w = _check_dim(data, w)
    n = data.n
    if partition is None:
        blocks = [np.arange(n)]
    else:
        blocks = [np.asarray(b, dtype=np.int64) for b in partition]
        flat = np.concatenate(blocks) if blocks else np.zeros(0, np.int64)
        if len(flat) != n or len(np.unique(flat)) != n:
            raise ValueError("partition must be a disjoint cover of all instance indices")
    acc = np.zeros(data.dim)
    for block in blocks:
        acc += gradient_partial(data, w, block)
    return acc / n + lam * w


def gradient_partial(data: Dataset, w: np.ndarray, block: np.ndarray) -> np.ndarray:
    """Unnormalized data-term gradient sum over one index block.

    Merge contract: summing the partials of a disjoint cover in block order
    and then adding ``n * lam * w`` equals ``n * full_gradient``.
    """
    acc = np.zeros(data.dim)
    labels = data.labels
    indptr, col, vals = data.indptr, data.col_indices, data.values
    for i in block:
        lo, hi = indptr[i], indptr[i + 1]
        idx = col[lo:hi]
        xv = vals[lo:hi]
        y = labels[i]
        z = float(xv @ w[idx]) if idx.size else 0.0
        coef = -y * float(expit(-y * z))
        if idx.size:
            acc[idx] += coef * xv
    return acc


def vr_update_vector(data: Dataset, i: int, u_read: np.ndarray, u0: np.ndarray,
                     g0: np.ndarray, lam: float) -> np.ndarray:
    """Variance-reduced stochastic direction grad f_i(u) - grad f_i(u0) + g0."""
    if u_read.shape != u0.shape or u_read.shape != g0.shape:
        raise ValueError("vector dimension mismatch")
    return gradient_example(data, i, u_read, lam) - gradient_example(data, i, u0, lam) + g0


def smoothness_constant(data: Dataset, lam: float) -> float:
    """Per-instance smoothness bound L = (1/4) max_i ||x_i||^2 + lam.

    The logistic Hessian contribution of one instance is bounded by
    ||x_i||^2 / 4; this is a conservative upper bound, which is all the
    rate certificates need.
    """
    if data.n < 1:
        raise ValueError("empty dataset")
    return 0.25 * float(data.row_sq_norms.max()) + lam


def strong_convexity_constant(lam: float) -> float:
    """mu = lam: the L2 term makes f lam-strongly convex (logistic part is convex)."""
    if lam <= 0:
        raise ValueError("lam must be > 0: without L2 the objective is not strongly convex")
    return float(lam)


def loss_constants(data: Dataset, lam: float) -> LossConstants:
    return LossConstants(smoothness=smoothness_constant(data, lam),
                         strong_convexity=strong_convexity_constant(lam),
                         regularizer=lam)


def logistic_coefs(data: Dataset, w: np.ndarray) -> np.ndarray:
    """Vector of per-instance scalars a_i(w) = -y_i sigma(-y_i x_i^T w).

    grad f_i(w) = a_i(w) x_i + lam w.
    """
    z = -data.labels * (data.matrix @ w)
    return -data.labels * expit(z)


def mean_sq_update_norm(data: Dataset, x: np.ndarray, u0: np.ndarray,
                        g0: np.ndarray, lam: float) -> float:
    """Exact (1/n) sum_i || grad f_i(x) - grad f_i(u0) + g0 ||^2, vectorized.

    Each term is d_i x_i + C with d_i = a_i(x) - a_i(u0) and
    C = g0 + lam (x - u0), so the enumeration over i reduces to O(nnz) work.
    """
    d = logistic_coefs(data, x) - logistic_coefs(data, u0)
    C = g0 + lam * (x - u0)
    xc = data.matrix @ C
    return float(np.mean(d * d * data.row_sq_norms) + 2.0 * np.mean(d * xc) + C @ C)
