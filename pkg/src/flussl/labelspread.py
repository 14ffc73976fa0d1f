"""Graph label spreading over pair-feature space.

A kNN graph (exact k per row, Euclidean metric, union symmetrization,
no self-loops, distance then index tie-break) is normalized to
S = D^(-1/2) W D^(-1/2). Scores iterate F <- alpha*S*F + (1-alpha)*Y
from F(0) = Y: soft clamping, so labelled rows report propagated
labels. Rows of the fixed point that are exactly zero (nothing labelled
in their component, or alpha = 0) are flagged undecided instead of
being given a class.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class LabelSpreadingSpec:
    n_neighbors: int = 7
    alpha: float = 0.2
    max_iter: int = 30
    tol: float = 1e-3

    def __post_init__(self) -> None:
        if self.n_neighbors < 1:
            raise ValueError(f"n_neighbors must be >= 1, got {self.n_neighbors}")
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError(f"alpha must lie in [0, 1), got {self.alpha}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.tol <= 0:
            raise ValueError(f"tol must be positive, got {self.tol}")

    def key(self) -> str:
        return (f"ls:n_neighbors={self.n_neighbors},alpha={self.alpha!r},"
                f"max_iter={self.max_iter}")


@dataclass
class SpreadResult:
    f: np.ndarray           # (n, 2) final scores
    labels: np.ndarray      # int8: 0 Similar, 1 Variant, -1 undecided
    undecided: np.ndarray   # bool mask of exactly-zero rows
    n_iter: int
    converged: bool


def knn_indices(x: np.ndarray, n_neighbors: int, chunk: int = 512) -> np.ndarray:
    """Each row's k nearest other rows; ties by distance then index."""
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    if not 1 <= n_neighbors < n:
        raise ValueError(
            f"n_neighbors must lie in [1, {n - 1}], got {n_neighbors}")
    sq = np.sum(x * x, axis=1)
    out = np.empty((n, n_neighbors), dtype=np.int64)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        d = sq[start:stop, None] + sq[None, :] - 2.0 * (x[start:stop] @ x.T)
        np.maximum(d, 0.0, out=d)
        d[np.arange(stop - start), np.arange(start, stop)] = np.inf  # self
        # stable argsort keeps the lowest index first among ties
        out[start:stop] = np.argsort(d, axis=1, kind="stable")[:, :n_neighbors]
    return out


def build_knn_graph(x: np.ndarray, n_neighbors: int) -> sp.csr_matrix:
    """Symmetrically normalized union-kNN adjacency S = D^-1/2 W D^-1/2."""
    nbrs = knn_indices(x, n_neighbors)
    n = len(nbrs)
    rows = np.repeat(np.arange(n), n_neighbors)
    w = sp.csr_matrix((np.ones(n * n_neighbors), (rows, nbrs.ravel())),
                      shape=(n, n))
    w = w.maximum(w.T)
    return normalize_adjacency(w)


def normalize_adjacency(w: sp.spmatrix | np.ndarray) -> sp.csr_matrix:
    """S = D^-1/2 W D^-1/2 for a symmetric non-negative W, zero diagonal."""
    w = sp.csr_matrix(w, dtype=np.float64)
    w.setdiag(0.0)
    w.eliminate_zeros()
    if (abs(w - w.T) > 1e-12).nnz:
        raise ValueError("adjacency must be symmetric")
    if (w.data < 0).any():
        raise ValueError("adjacency must be non-negative")
    deg = np.asarray(w.sum(axis=1)).ravel()
    if (deg == 0).any():
        raise ValueError("graph has isolated nodes")
    inv_sqrt = 1.0 / np.sqrt(deg)
    d = sp.diags(inv_sqrt)
    return (d @ w @ d).tocsr()


def one_hot(y: np.ndarray) -> np.ndarray:
    """Labels {-1 unlabelled, 0, 1} to an (n, 2) initial score matrix."""
    y = np.asarray(y)
    if not np.isin(y, (-1, 0, 1)).all():
        raise ValueError(f"labels must be -1/0/1, got {np.unique(y)}")
    out = np.zeros((len(y), 2))
    out[y == 0, 0] = 1.0
    out[y == 1, 1] = 1.0
    return out


def label_spread(spec: LabelSpreadingSpec, s: sp.spmatrix,
                 y_init: np.ndarray) -> SpreadResult:
    """Iterate the spreading fixed point and harden the scores.

    y_init is the (n, 2) one-hot matrix with zero rows for unlabelled
    nodes; both classes must be represented. Hardening is argmax with
    ties toward class 1, except exactly-zero rows, which stay -1.
    """
    y_init = np.asarray(y_init, dtype=np.float64)
    if y_init.ndim != 2 or y_init.shape[1] != 2:
        raise ValueError(f"y_init must be (n, 2), got {y_init.shape}")
    if y_init.shape[0] != s.shape[0]:
        raise ValueError(
            f"graph has {s.shape[0]} nodes but y_init has {len(y_init)} rows")
    col_mass = y_init.sum(axis=0)
    if (col_mass == 0).any():
        raise ValueError("every class needs at least one labelled row")

    f = y_init.copy()
    n_iter = 0
    converged = False
    for n_iter in range(1, spec.max_iter + 1):
        f_next = spec.alpha * (s @ f) + (1.0 - spec.alpha) * y_init
        delta = float(np.abs(f_next - f).max())
        f = f_next
        if delta < spec.tol:
            converged = True
            break

    undecided = (f == 0).all(axis=1)
    labels = np.where(f[:, 1] >= f[:, 0], 1, 0).astype(np.int8)
    labels[undecided] = -1
    return SpreadResult(f, labels, undecided, n_iter, converged)
