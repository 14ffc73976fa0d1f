"""Random forest for binary labels, built from scratch on numpy.

Trees grow on bootstrap resamples, choosing at each node the best Gini
split among floor(sqrt(n_features)) candidate features. Forest
probabilities are hard-vote fractions. Everything is deterministic
given the seed: per-tree RNG streams derive from it, and split ties
resolve to the lowest feature index then the lowest threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._util import seed_from


@dataclass
class Tree:
    """Flat node arrays; feature == -1 marks a leaf."""

    feature: np.ndarray   # int32
    threshold: np.ndarray  # float64, nan at leaves
    left: np.ndarray      # int32, -1 at leaves
    right: np.ndarray     # int32, -1 at leaves
    vote: np.ndarray      # int8 class vote at every node (majority, ties to 1)

    def predict(self, x: np.ndarray) -> np.ndarray:
        node = np.zeros(len(x), dtype=np.int32)
        while True:
            feat = self.feature[node]
            rows = np.nonzero(feat >= 0)[0]
            if rows.size == 0:
                break
            cur = node[rows]
            go_left = x[rows, feat[rows]] <= self.threshold[cur]
            node[rows] = np.where(go_left, self.left[cur], self.right[cur])
        return self.vote[node]

    def depth(self) -> int:
        depths = np.zeros(len(self.feature), dtype=np.int32)
        for i in range(len(self.feature)):
            if self.feature[i] >= 0:
                depths[self.left[i]] = depths[i] + 1
                depths[self.right[i]] = depths[i] + 1
        return int(depths.max()) if len(depths) else 0


def _best_split(x, y, idx, candidates):
    """Lowest weighted-Gini split over the candidate features.

    Returns (impurity, feature, threshold) or None when every candidate
    is constant on the node. Ties go to the lowest feature index (the
    caller passes candidates in ascending order) then lowest threshold
    (argmin picks the first position, and thresholds ascend).
    """
    ys = y[idx]
    n = idx.size
    n1 = int(ys.sum())
    best = None
    for f in candidates:
        v = x[idx, f]
        order = np.argsort(v, kind="stable")
        vs = v[order]
        pos = np.nonzero(vs[:-1] < vs[1:])[0]
        if pos.size == 0:
            continue
        ones = np.cumsum(ys[order])
        nl = (pos + 1).astype(np.float64)
        nr = n - nl
        ones_l = ones[pos].astype(np.float64)
        ones_r = n1 - ones_l
        gini_l = 1.0 - (ones_l / nl) ** 2 - ((nl - ones_l) / nl) ** 2
        gini_r = 1.0 - (ones_r / nr) ** 2 - ((nr - ones_r) / nr) ** 2
        weighted = (nl * gini_l + nr * gini_r) / n
        j = int(np.argmin(weighted))
        thr = 0.5 * (vs[pos[j]] + vs[pos[j] + 1])
        if not (vs[pos[j]] <= thr < vs[pos[j] + 1]):
            thr = float(vs[pos[j]])  # adjacent floats: split on the value itself
        if best is None or weighted[j] < best[0]:
            best = (float(weighted[j]), int(f), float(thr))
    return best


def _grow_tree(x, y, sample_idx, max_depth, rng) -> Tree:
    n_features = x.shape[1]
    mtry = max(1, int(math.sqrt(n_features)))
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    vote: list[int] = []

    # stack of (node sample indices, depth, parent slot, is_left_child)
    stack = [(sample_idx, 0, -1, False)]
    while stack:
        idx, depth, parent, is_left = stack.pop()
        slot = len(feature)
        if parent >= 0:
            if is_left:
                left[parent] = slot
            else:
                right[parent] = slot
        ys = y[idx]
        c1 = int(ys.sum())
        c0 = idx.size - c1
        feature.append(-1)
        threshold.append(math.nan)
        left.append(-1)
        right.append(-1)
        vote.append(1 if c1 >= c0 else 0)

        pure = c0 == 0 or c1 == 0
        deep = max_depth is not None and depth >= max_depth
        if pure or deep or idx.size < 2:
            continue
        candidates = np.sort(rng.choice(n_features, size=mtry, replace=False))
        split = _best_split(x, y, idx, candidates)
        if split is None and mtry < n_features:
            split = _best_split(x, y, idx, np.arange(n_features))
        if split is None:
            continue
        _, f, thr = split
        go_left = x[idx, f] <= thr
        feature[slot] = f
        threshold[slot] = thr
        # push right first so the left child is built next (preorder layout)
        stack.append((idx[~go_left], depth + 1, slot, False))
        stack.append((idx[go_left], depth + 1, slot, True))

    return Tree(np.array(feature, dtype=np.int32),
                np.array(threshold, dtype=np.float64),
                np.array(left, dtype=np.int32),
                np.array(right, dtype=np.int32),
                np.array(vote, dtype=np.int8))


class RandomForest:
    """Bagged Gini trees with vote-fraction probabilities.

    predict_proba returns per-class vote fractions over (Similar,
    Variant) = columns (0, 1); predict breaks 50/50 ties toward class 1.
    Out-of-bag votes accumulate during fit for diagnostics.
    """

    def __init__(self, n_estimators: int = 100, max_depth: int | None = None,
                 seed: int = 0):
        if n_estimators < 1:
            raise ValueError(f"n_estimators must be >= 1, got {n_estimators}")
        if max_depth is not None and max_depth < 1:
            raise ValueError(f"max_depth must be >= 1 or None, got {max_depth}")
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.seed = seed
        self.trees: list[Tree] = []
        self.n_features_: int | None = None
        self.oob_votes_: np.ndarray | None = None  # (n_samples, 2)
        self.in_bag_: np.ndarray | None = None     # bool (n_estimators, n)

    def fit(self, x: np.ndarray, y: np.ndarray) -> "RandomForest":
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
        n = len(x)

        self.trees = []
        self.in_bag_ = np.zeros((self.n_estimators, n), dtype=bool)
        self.oob_votes_ = np.zeros((n, 2), dtype=np.int64)
        for i in range(self.n_estimators):
            rng = np.random.default_rng(seed_from(self.seed, "tree", i))
            sample_idx = rng.integers(0, n, size=n)
            tree = _grow_tree(x, y01, sample_idx, self.max_depth, rng)
            self.trees.append(tree)
            self.in_bag_[i, sample_idx] = True
            oob = ~self.in_bag_[i]
            if oob.any():
                votes = tree.predict(x[oob])
                np.add.at(self.oob_votes_, (np.nonzero(oob)[0], votes), 1)
        self.n_features_ = x.shape[1]
        return self

    def _check_x(self, x: np.ndarray) -> np.ndarray:
        if not self.trees:
            raise ValueError("model not fitted")
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.n_features_:
            raise ValueError(
                f"expected {self.n_features_} features, got shape {x.shape}")
        return x

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        x = self._check_x(x)
        counts = np.zeros((len(x), 2), dtype=np.int64)
        for tree in self.trees:
            votes = tree.predict(x)
            np.add.at(counts, (np.arange(len(x)), votes), 1)
        return counts / self.n_estimators

    def predict(self, x: np.ndarray) -> np.ndarray:
        proba = self.predict_proba(x)
        return (proba[:, 1] >= proba[:, 0]).astype(np.int8)

    def oob_coverage(self) -> float:
        """Fraction of training samples holding at least one OOB vote."""
        if self.oob_votes_ is None:
            raise ValueError("model not fitted")
        return float((self.oob_votes_.sum(axis=1) > 0).mean())
