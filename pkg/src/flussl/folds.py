"""Nested cross-validation folds and label-scarcity masking.

Outer folds (k=5) estimate performance; each outer training set is
re-partitioned into inner folds (k=4) for hyperparameter tuning.
Splits stratify by (class, subtype) when every such cell is large
enough for the fold count, falling back to class-only stratification
with a warning. Masking simulates scarcity: a supervision ratio of the
outer training set keeps its labels, the rest become pseudo-unlabelled
(PUL) whose true labels are withheld from every training path.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._util import seed_from

OUTER_K = 5
INNER_K = 4
RATIOS = (0.25, 0.5, 0.75, 1.0)


class FoldError(ValueError):
    """Raised when a split or mask cannot be constructed."""


@dataclass(frozen=True)
class Fold:
    train: np.ndarray
    test: np.ndarray


@dataclass(frozen=True)
class FoldPlan:
    outer_k: int
    inner_k: int
    seed: int
    stratified_by: str  # "class+subtype" or "class"
    outer: tuple[Fold, ...]
    inner: tuple[tuple[Fold, ...], ...]  # [outer fold][inner fold]


@dataclass(frozen=True)
class MaskPlan:
    ratio: float
    seed: int
    retained: np.ndarray  # indices keeping their labels
    pul: np.ndarray       # indices treated as unlabelled during training


def _stratum_keys(y, subtypes, indices, k):
    """(class, subtype) keys when every cell can fill k folds, else class."""
    combo = [(int(y[i]), subtypes[i]) for i in indices]
    counts: dict[tuple, int] = {}
    for key in combo:
        counts[key] = counts.get(key, 0) + 1
    if min(counts.values()) >= k:
        return combo, "class+subtype"
    return [int(y[i]) for i in indices], "class"


def _deal(indices: np.ndarray, strata: list, k: int, rng) -> list[np.ndarray]:
    """Round-robin each shuffled stratum into k folds from a random offset.

    Per stratum the fold sizes differ by at most one; random offsets
    keep the remainders from always landing in the low folds.
    """
    folds: list[list[int]] = [[] for _ in range(k)]
    order = {}
    for idx, stratum in zip(indices, strata):
        order.setdefault(stratum, []).append(idx)
    for stratum in sorted(order):
        members = np.array(order[stratum])
        perm = rng.permutation(len(members))
        offset = int(rng.integers(0, k))
        for j, member in enumerate(members[perm]):
            folds[(offset + j) % k].append(int(member))
    return [np.array(sorted(f), dtype=np.int64) for f in folds]


def make_folds(
    y: Sequence[int],
    subtypes: Sequence[str],
    seed: int,
    outer_k: int = OUTER_K,
    inner_k: int = INNER_K,
) -> FoldPlan:
    """Deterministic nested split plan over the labelled pair indices."""
    y = np.asarray(y)
    if len(y) != len(subtypes):
        raise FoldError(f"{len(y)} labels vs {len(subtypes)} subtypes")
    if len(y) < outer_k:
        raise FoldError(
            f"need at least {outer_k} labelled examples, got {len(y)}")
    all_idx = np.arange(len(y))

    strata, mode = _stratum_keys(y, subtypes, all_idx, outer_k)
    if mode == "class":
        warnings.warn(
            "a (class, subtype) cell is too small for the outer fold "
            "count; stratifying by class only", stacklevel=2)
    rng = np.random.default_rng(seed_from(seed, "outer"))
    test_sets = _deal(all_idx, strata, outer_k, rng)
    outer = tuple(
        Fold(np.setdiff1d(all_idx, test), test) for test in test_sets)

    inner: list[tuple[Fold, ...]] = []
    for fold_no, fold in enumerate(outer):
        train = fold.train
        strata_in, mode_in = _stratum_keys(y, subtypes, train, inner_k)
        if mode_in == "class" and mode == "class+subtype":
            warnings.warn(
                f"outer fold {fold_no}: inner split falls back to "
                "class-only stratification", stacklevel=2)
        rng_in = np.random.default_rng(seed_from(seed, "inner", fold_no))
        inner_tests = _deal(train, strata_in, inner_k, rng_in)
        inner.append(tuple(
            Fold(np.setdiff1d(train, t), t) for t in inner_tests))
    return FoldPlan(outer_k, inner_k, seed, mode, outer, tuple(inner))


def _apportion(ratio: float, class_counts: list[int]) -> list[int]:
    """Per-class retained counts summing to round(ratio * total).

    Largest-remainder rounding of the per-class quotas, then at least
    one per class when the total allows it (taking from the largest).
    """
    total = int(round(ratio * sum(class_counts)))
    quotas = [ratio * c for c in class_counts]
    take = [int(q) for q in quotas]
    by_frac = sorted(range(len(quotas)),
                     key=lambda i: (-(quotas[i] - take[i]), i))
    for i in range(total - sum(take)):
        take[by_frac[i]] += 1
    for i in range(len(take)):
        if take[i] == 0 and total >= len(take):
            donor = max(range(len(take)), key=lambda j: (take[j], -j))
            take[donor] -= 1
            take[i] += 1
    return take


def mask_labels(
    train_idx: np.ndarray,
    y: Sequence[int],
    ratio: float,
    seed: int,
    max_attempts: int = 10,
) -> MaskPlan:
    """Split an outer training set into retained-labelled and PUL parts.

    |retained| = round(ratio * |train|), stratified per class so both
    classes survive whenever that is feasible; infeasible draws retry
    with an incremented sub-seed before giving up.
    """
    if ratio not in RATIOS:
        raise FoldError(f"ratio must be one of {RATIOS}, got {ratio}")
    train_idx = np.asarray(train_idx)
    y = np.asarray(y)
    y_train = y[train_idx]
    classes = np.unique(y_train)

    if ratio == 1.0:
        return MaskPlan(ratio, seed, np.sort(train_idx),
                        np.array([], dtype=np.int64))

    for attempt in range(max_attempts):
        rng = np.random.default_rng(seed_from(seed, "mask", attempt))
        per_class = _apportion(ratio, [int((y_train == c).sum())
                                       for c in classes])
        retained_parts = []
        for cls, count in zip(classes, per_class):
            members = train_idx[y_train == cls]
            perm = rng.permutation(len(members))
            retained_parts.append(members[perm[:count]])
        retained = np.sort(np.concatenate(retained_parts))
        survived = {int(c) for c in y[retained]}
        if survived == {int(c) for c in classes}:
            pul = np.setdiff1d(train_idx, retained)
            return MaskPlan(ratio, seed, retained, pul)
    raise FoldError(
        f"masking at ratio {ratio} kept eliminating a class after "
        f"{max_attempts} attempts")
