"""Hyperparameter grids and exhaustive inner-fold search.

Default grids: forests cross {10,50,100,150,200} trees with depths
{5,10,15,20,None}; SVMs cross 8 log-spaced points of both C and gamma
over [1e-6, 1e1]; self-training crosses its promotion settings with the
base-learner grid; label spreading crosses alpha, neighbour count, and
iteration cap. Selection maximizes mean inner-fold F1, breaking ties
toward the smaller model (fewer trees, smaller C, fewer neighbours)
and then the earlier grid position.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .classifiers import ClassifierSpec
from .labelspread import LabelSpreadingSpec
from .selftraining import SelfTrainingSpec

RF_N_ESTIMATORS = (10, 50, 100, 150, 200)
RF_MAX_DEPTHS = (5, 10, 15, 20, None)
SVM_EXPONENTS = tuple(range(-6, 2))  # 10^-6 .. 10^1, 8 points per axis
ST_THRESHOLDS = (0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90,
                 0.95, 0.99)
ST_CRITERIA = ("threshold", "k_best")
ST_K_BEST = (3, 5, 10, 15)
ST_MAX_ITERS = (5, 10, 15, 20)
LS_ALPHAS = (0.1, 0.2, 0.3)
LS_N_NEIGHBORS = (3, 5, 7, 11, 20, 30, 40, 50, 75, 100)
LS_MAX_ITERS = (20, 25, 30, 35, 40, 45, 50)


class GridSearchError(RuntimeError):
    """Raised when every configuration in a grid fails to train."""


def rf_grid(
    n_estimators: Sequence[int] = RF_N_ESTIMATORS,
    max_depths: Sequence[int | None] = RF_MAX_DEPTHS,
) -> list[ClassifierSpec]:
    return [ClassifierSpec("rf", n_estimators=n, max_depth=d)
            for n in n_estimators for d in max_depths]


def svm_grid(
    cs: Sequence[float] | None = None,
    gammas: Sequence[float] | None = None,
) -> list[ClassifierSpec]:
    if cs is None:
        cs = [float(10.0 ** e) for e in SVM_EXPONENTS]
    if gammas is None:
        gammas = [float(10.0 ** e) for e in SVM_EXPONENTS]
    return [ClassifierSpec("svm", c=c, gamma=g) for c in cs for g in gammas]


def self_training_grid(
    base_grid: Sequence[ClassifierSpec],
    thresholds: Sequence[float] = ST_THRESHOLDS,
    criteria: Sequence[str] = ST_CRITERIA,
    k_bests: Sequence[int] = ST_K_BEST,
    max_iters: Sequence[int] = ST_MAX_ITERS,
) -> list[SelfTrainingSpec]:
    """Promotion settings crossed with the base grid.

    The threshold axis applies only under the threshold criterion and
    k_best only under k-best, so the cross never repeats equivalent
    configurations.
    """
    out = []
    for base in base_grid:
        for criterion in criteria:
            if criterion == "threshold":
                for tau in thresholds:
                    for mi in max_iters:
                        out.append(SelfTrainingSpec(
                            base, "threshold", threshold=tau, max_iter=mi))
            else:
                for k in k_bests:
                    for mi in max_iters:
                        out.append(SelfTrainingSpec(
                            base, "k_best", k_best=k, max_iter=mi))
    return out


def label_spreading_grid(
    alphas: Sequence[float] = LS_ALPHAS,
    n_neighbors: Sequence[int] = LS_N_NEIGHBORS,
    max_iters: Sequence[int] = LS_MAX_ITERS,
) -> list[LabelSpreadingSpec]:
    return [LabelSpreadingSpec(n_neighbors=k, alpha=a, max_iter=m)
            for a in alphas for k in n_neighbors for m in max_iters]


def model_size(spec) -> float:
    """Tie-break size: fewer trees, smaller C, fewer neighbours win."""
    if isinstance(spec, ClassifierSpec):
        return spec.n_estimators if spec.kind == "rf" else spec.c
    if isinstance(spec, SelfTrainingSpec):
        return model_size(spec.base)
    if isinstance(spec, LabelSpreadingSpec):
        return spec.n_neighbors
    raise TypeError(f"no size rule for {type(spec).__name__}")


@dataclass
class GridResult:
    best: object
    best_mean: float
    means: dict[str, float]      # config key -> mean inner F1
    failures: dict[str, str]     # config key -> diagnostic


def grid_search(
    candidates: Sequence,
    evaluate: Callable[[object], Sequence[float]],
) -> GridResult:
    """Exhaustive search; evaluate returns per-inner-fold F1 scores."""
    if not candidates:
        raise GridSearchError("empty grid")
    means: dict[str, float] = {}
    failures: dict[str, str] = {}
    scored = []
    for position, spec in enumerate(candidates):
        try:
            fold_scores = evaluate(spec)
            mean = float(np.mean(fold_scores))
        except Exception as exc:  # noqa: BLE001 - diagnostics per config
            failures[spec.key()] = f"{type(exc).__name__}: {exc}"
            continue
        means[spec.key()] = mean
        scored.append((mean, model_size(spec), position, spec))
    if not scored:
        lines = "; ".join(f"{k} -> {v}" for k, v in failures.items())
        raise GridSearchError(f"every configuration failed: {lines}")
    scored.sort(key=lambda row: (-row[0], row[1], row[2]))
    best_mean, _, _, best = scored[0]
    return GridResult(best, best_mean, means, failures)
