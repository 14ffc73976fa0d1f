"""RBF-kernel support vector classifier trained by SMO.

The dual problem is solved by sequential minimal optimization with
maximal-violating-pair working-set selection, stopping when the KKT
violation gap m - M drops to tol (default 1e-3). Kernel rows are
computed lazily and cached. The bias is the midpoint -(m + M)/2 read
off the final gradient. Probabilities come from a sigmoid calibrated
on an internal stratified 80/20 split, after which the machine is
refitted on the full training set.
"""

from __future__ import annotations

import math

import numpy as np

from ._util import seed_from

KKT_TOL = 1e-3


def rbf_kernel(x: np.ndarray, z: np.ndarray, gamma: float) -> np.ndarray:
    """k(u, v) = exp(-gamma * ||u - v||^2) for all rows of x against z."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    sq = (np.sum(x * x, axis=1)[:, None] + np.sum(z * z, axis=1)[None, :]
          - 2.0 * (x @ z.T))
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


class _RowCache:
    """Lazy kernel rows for one training matrix."""

    def __init__(self, x: np.ndarray, gamma: float):
        self.x = x
        self.gamma = gamma
        self.sq = np.sum(x * x, axis=1)
        self.rows: dict[int, np.ndarray] = {}

    def row(self, i: int) -> np.ndarray:
        cached = self.rows.get(i)
        if cached is None:
            d = self.sq + self.sq[i] - 2.0 * (self.x @ self.x[i])
            np.maximum(d, 0.0, out=d)
            cached = np.exp(-self.gamma * d)
            cached[i] = 1.0
            self.rows[i] = cached
        return cached


def smo_solve(
    x: np.ndarray,
    y_pm: np.ndarray,
    c: float,
    gamma: float,
    tol: float = KKT_TOL,
    max_iter: int | None = None,
) -> tuple[np.ndarray, float, int, bool]:
    """Solve the C-SVC dual for labels in {-1, +1}.

    Returns (alpha, bias, iterations, converged). Each step picks the
    maximal KKT-violating pair: i maximizing -y*grad over the up set,
    j minimizing it over the low set, then solves the two-variable
    subproblem analytically with box clipping.
    """
    n = len(x)
    if max_iter is None:
        max_iter = max(100_000, 100 * n)
    cache = _RowCache(x, gamma)
    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of the dual objective at alpha = 0
    tau = 1e-12

    pos = y_pm > 0
    m_val = math.inf
    big_m_val = -math.inf
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        neg_yg = -(y_pm * grad)
        up = (pos & (alpha < c)) | (~pos & (alpha > 0))
        low = (pos & (alpha > 0)) | (~pos & (alpha < c))
        if not up.any() or not low.any():
            m_val = -math.inf if not up.any() else neg_yg[up].max()
            big_m_val = math.inf if not low.any() else neg_yg[low].min()
            converged = True
            break
        i = int(np.argmax(np.where(up, neg_yg, -np.inf)))
        j = int(np.argmin(np.where(low, neg_yg, np.inf)))
        m_val = neg_yg[i]
        big_m_val = neg_yg[j]
        if m_val - big_m_val <= tol:
            converged = True
            break

        ki = cache.row(i)
        kj = cache.row(j)
        old_i, old_j = alpha[i], alpha[j]
        if y_pm[i] != y_pm[j]:
            quad = ki[i] + kj[j] + 2.0 * ki[j]
            if quad <= 0:
                quad = tau
            delta = (-grad[i] - grad[j]) / quad
            diff = old_i - old_j
            ai, aj = old_i + delta, old_j + delta
            if diff > 0 and aj < 0:
                aj, ai = 0.0, diff
            elif diff <= 0 and ai < 0:
                ai, aj = 0.0, -diff
            if diff > 0 and ai > c:
                ai, aj = c, c - diff
            elif diff <= 0 and aj > c:
                aj, ai = c, c + diff
        else:
            quad = ki[i] + kj[j] - 2.0 * ki[j]
            if quad <= 0:
                quad = tau
            delta = (grad[i] - grad[j]) / quad
            total = old_i + old_j
            ai, aj = old_i - delta, old_j + delta
            if total > c and ai > c:
                ai, aj = c, total - c
            elif total <= c and aj < 0:
                aj, ai = 0.0, total
            if total > c and aj > c:
                aj, ai = c, total - c
            elif total <= c and ai < 0:
                ai, aj = 0.0, total

        alpha[i], alpha[j] = ai, aj
        qi = y_pm[i] * y_pm * ki
        qj = y_pm[j] * y_pm * kj
        grad += qi * (ai - old_i) + qj * (aj - old_j)

    bias = 0.0
    if math.isfinite(m_val) and math.isfinite(big_m_val):
        bias = (m_val + big_m_val) / 2.0
    return alpha, bias, it, converged


# ---------------------------------------------------------------------------
# Probability calibration


def platt_sigmoid(decision: np.ndarray, a: float, b: float) -> np.ndarray:
    """P(positive | decision) = 1 / (1 + exp(a * decision + b)), stably."""
    z = a * np.asarray(decision, dtype=np.float64) + b
    t = np.exp(-np.abs(z))
    return np.where(z >= 0, t / (1.0 + t), 1.0 / (1.0 + t))


def platt_fit(
    decision: np.ndarray,
    y01: np.ndarray,
    max_iter: int = 100,
    min_step: float = 1e-10,
    sigma: float = 1e-12,
) -> tuple[float, float]:
    """Newton fit of the calibration sigmoid with Bayes-smoothed targets."""
    f = np.asarray(decision, dtype=np.float64)
    y01 = np.asarray(y01)
    prior1 = float((y01 == 1).sum())
    prior0 = float(len(y01) - prior1)
    hi = (prior1 + 1.0) / (prior1 + 2.0)
    lo = 1.0 / (prior0 + 2.0)
    t = np.where(y01 == 1, hi, lo)

    def objective(a: float, b: float) -> float:
        z = a * f + b
        pos = z >= 0
        val = np.empty_like(z)
        val[pos] = t[pos] * z[pos] + np.log1p(np.exp(-z[pos]))
        val[~pos] = (t[~pos] - 1.0) * z[~pos] + np.log1p(np.exp(z[~pos]))
        return float(val.sum())

    a = 0.0
    b = math.log((prior0 + 1.0) / (prior1 + 1.0))
    fval = objective(a, b)
    for _ in range(max_iter):
        p = platt_sigmoid(f, a, b)
        d2 = p * (1.0 - p)
        h11 = sigma + float((f * f * d2).sum())
        h22 = sigma + float(d2.sum())
        h21 = float((f * d2).sum())
        d1 = t - p
        g1 = float((f * d1).sum())
        g2 = float(d1.sum())
        if abs(g1) < 1e-5 and abs(g2) < 1e-5:
            break
        det = h11 * h22 - h21 * h21
        da = -(h22 * g1 - h21 * g2) / det
        db = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * da + g2 * db
        step = 1.0
        while step >= min_step:
            na, nb = a + step * da, b + step * db
            nf = objective(na, nb)
            if nf < fval + 1e-4 * step * gd:
                a, b, fval = na, nb, nf
                break
            step /= 2.0
        else:
            break
    return a, b


def _stratified_split(y01: np.ndarray, held_fraction: float, rng) -> tuple[
        np.ndarray, np.ndarray] | None:
    """Per-class shuffle-and-cut; None when a class cannot span both sides."""
    train_parts, held_parts = [], []
    for cls in (0, 1):
        idx = np.nonzero(y01 == cls)[0]
        if idx.size < 2:
            return None
        n_held = max(1, int(round(held_fraction * idx.size)))
        if n_held >= idx.size:
            n_held = idx.size - 1
        perm = rng.permutation(idx)
        held_parts.append(perm[:n_held])
        train_parts.append(perm[n_held:])
    train = np.sort(np.concatenate(train_parts))
    held = np.sort(np.concatenate(held_parts))
    return train, held


class SVM:
    """Calibrated binary RBF-SVM; class 1 is the dual's positive label."""

    def __init__(self, c: float = 1.0, gamma: float = 1.0, seed: int = 0,
                 tol: float = KKT_TOL):
        if c <= 0:
            raise ValueError(f"c must be positive, got {c}")
        if gamma <= 0:
            raise ValueError(f"gamma must be positive, got {gamma}")
        self.c = c
        self.gamma = gamma
        self.seed = seed
        self.tol = tol
        self.sv_x: np.ndarray | None = None
        self.sv_coef: np.ndarray | None = None
        self.bias = 0.0
        self.platt_a = -1.0
        self.platt_b = 0.0
        self.alpha_: np.ndarray | None = None
        self.converged_ = False
        self.n_features_: int | None = None

    def _solve(self, x, y_pm):
        alpha, bias, _, converged = smo_solve(
            x, y_pm, self.c, self.gamma, self.tol)
        return alpha, bias, converged

    def fit(self, x: np.ndarray, y: np.ndarray) -> "SVM":
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y)
        if x.ndim != 2 or len(x) != len(y):
            raise ValueError(f"bad shapes x={x.shape} y={y.shape}")
        if np.isnan(x).any():
            raise ValueError("NaN in feature matrix")
        classes = np.unique(y)
        if not np.isin(classes, (0, 1)).all():
            raise ValueError(f"labels must be 0/1, got {classes}")
        if classes.size < 2:
            raise ValueError("training data contains a single class")
        y01 = y.astype(np.int8)
        y_pm = np.where(y01 == 1, 1.0, -1.0)

        rng = np.random.default_rng(seed_from(self.seed, "platt-split"))
        split = _stratified_split(y01, 0.2, rng)
        if split is not None:
            tr, held = split
            alpha, bias, _ = self._solve(x[tr], y_pm[tr])
            coef = alpha * y_pm[tr]
            dec = rbf_kernel(x[held], x[tr], self.gamma) @ coef + bias
            self.platt_a, self.platt_b = platt_fit(dec, y01[held])
        # final machine on the full fold
        alpha, bias, converged = self._solve(x, y_pm)
        if split is None:
            # a class too small to split: calibrate on resubstitution values
            coef = alpha * y_pm
            dec = rbf_kernel(x, x, self.gamma) @ coef + bias
            self.platt_a, self.platt_b = platt_fit(dec, y01)
        sv = alpha > 0
        self.alpha_ = alpha
        self.sv_x = x[sv]
        self.sv_coef = alpha[sv] * y_pm[sv]
        self.bias = bias
        self.converged_ = converged
        self.n_features_ = x.shape[1]
        return self

    def _check_x(self, x):
        if self.sv_x is None:
            raise ValueError("model not fitted")
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.n_features_:
            raise ValueError(
                f"expected {self.n_features_} features, got shape {x.shape}")
        return x

    def decision_function(self, x: np.ndarray) -> np.ndarray:
        x = self._check_x(x)
        if len(x) == 0:
            return np.zeros(0)
        if len(self.sv_x) == 0:
            return np.full(len(x), self.bias)
        return rbf_kernel(x, self.sv_x, self.gamma) @ self.sv_coef + self.bias

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        p1 = platt_sigmoid(self.decision_function(x), self.platt_a,
                           self.platt_b)
        return np.column_stack([1.0 - p1, p1])

    def predict(self, x: np.ndarray) -> np.ndarray:
        proba = self.predict_proba(x)
        return (proba[:, 1] >= proba[:, 0]).astype(np.int8)
