"""F1 scoring and bootstrap confidence intervals.

The positive class is Variant (1). F1 = 2TP / (2TP + FP + FN), defined
as 0 when the denominator is 0. Confidence intervals use the percentile
bootstrap over test examples: pairs are resampled with replacement
within each fold, the fold-mean F1 recomputed per replicate, and the
interval read from the replicate quantiles (then widened, if a quantile
crosses it, to bracket the point estimate).
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ._util import seed_from

N_RESAMPLES = 1000
LEVEL = 0.95


def f1_score(y_true: np.ndarray, y_pred: np.ndarray, positive: int = 1) -> float:
    """Binary F1; predictions other than the positive class (including
    the undecided marker -1) count as negative."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"length mismatch: {y_true.shape} vs {y_pred.shape}")
    if y_true.size == 0:
        raise ValueError("empty label vectors")
    tp = int(((y_true == positive) & (y_pred == positive)).sum())
    fp = int(((y_true != positive) & (y_pred == positive)).sum())
    fn = int(((y_true == positive) & (y_pred != positive)).sum())
    denom = 2 * tp + fp + fn
    if denom == 0:
        return 0.0
    return 2.0 * tp / denom


def macro_class_f1(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    """Unweighted mean of the per-class F1 scores."""
    return (f1_score(y_true, y_pred, positive=1)
            + f1_score(y_true, y_pred, positive=0)) / 2.0


def fold_mean_f1(folds: Sequence[tuple[np.ndarray, np.ndarray]],
                 positive: int = 1) -> float:
    """Mean of per-fold F1 over (y_true, y_pred) fold outcome pairs."""
    if not folds:
        raise ValueError("no fold outcomes")
    return float(np.mean([f1_score(t, p, positive) for t, p in folds]))


def bootstrap_ci_folds(
    folds: Sequence[tuple[np.ndarray, np.ndarray]],
    n_resamples: int = N_RESAMPLES,
    level: float = LEVEL,
    seed: int = 0,
    positive: int = 1,
    stat: Callable[[np.ndarray, np.ndarray], float] | None = None,
) -> tuple[float, float]:
    """Percentile CI for the fold-mean statistic, resampling within folds.

    The statistic defaults to F1 on the positive class; any callable
    stat(y_true, y_pred) -> float may be substituted, e.g. the
    class-macro F1.
    """
    if not folds:
        raise ValueError("no fold outcomes")
    if not 0 < level < 1:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    if stat is None:
        def stat(t, p):
            return f1_score(t, p, positive)
    folds = [(np.asarray(t), np.asarray(p)) for t, p in folds]
    rng = np.random.default_rng(seed_from(seed, "bootstrap"))
    replicates = np.empty(n_resamples)
    for r in range(n_resamples):
        values = []
        for y_true, y_pred in folds:
            n = len(y_true)
            pick = rng.integers(0, n, size=n)
            values.append(stat(y_true[pick], y_pred[pick]))
        replicates[r] = np.mean(values)
    tail = 100.0 * (1.0 - level) / 2.0
    low, high = np.percentile(replicates, [tail, 100.0 - tail])
    point = float(np.mean([stat(t, p) for t, p in folds]))
    return min(float(low), point), max(float(high), point)


def bootstrap_ci_grouped(
    folds: Sequence[tuple[np.ndarray, np.ndarray, np.ndarray]],
    n_resamples: int = N_RESAMPLES,
    level: float = LEVEL,
    seed: int = 0,
    positive: int = 1,
) -> tuple[float, float]:
    """Percentile CI for the fold-mean of group-macro F1.

    Fold entries are (y_true, y_pred, group). Each replicate resamples
    every group within itself, so all groups stay represented and the
    replicate statistic is the same macro average as the point estimate:
    mean over folds of the mean over groups of the group's F1.
    """
    if not folds:
        raise ValueError("no fold outcomes")
    if not 0 < level < 1:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    prepared = []
    for t, p, g in folds:
        t, p, g = np.asarray(t), np.asarray(p), np.asarray(g)
        if not len(t) == len(p) == len(g):
            raise ValueError(
                f"misaligned fold arrays: {len(t)}, {len(p)}, {len(g)}")
        members = [np.flatnonzero(g == val) for val in np.unique(g)]
        prepared.append((t, p, members))
    rng = np.random.default_rng(seed_from(seed, "bootstrap"))
    replicates = np.empty(n_resamples)
    for r in range(n_resamples):
        values = []
        for t, p, members in prepared:
            parts = []
            for m in members:
                pick = m[rng.integers(0, len(m), size=len(m))]
                parts.append(f1_score(t[pick], p[pick], positive))
            values.append(np.mean(parts))
        replicates[r] = np.mean(values)
    tail = 100.0 * (1.0 - level) / 2.0
    low, high = np.percentile(replicates, [tail, 100.0 - tail])
    point = float(np.mean([
        np.mean([f1_score(t[m], p[m], positive) for m in members])
        for t, p, members in prepared]))
    return min(float(low), point), max(float(high), point)


def bootstrap_ci(
    y_true: np.ndarray,
    y_pred: np.ndarray,
    n_resamples: int = N_RESAMPLES,
    level: float = LEVEL,
    seed: int = 0,
    positive: int = 1,
) -> tuple[float, float]:
    """Single-pool percentile CI: the one-fold case of the fold version."""
    return bootstrap_ci_folds([(y_true, y_pred)], n_resamples, level, seed,
                              positive)
