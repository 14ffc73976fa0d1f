"""Self-training: iterative pseudo-labelling around any base learner.

Each round trains the base learner on the current labelled pool, scores
the remaining unlabelled pool, and promotes confident instances with
their predicted labels: everything at or above a probability threshold,
or the k most confident (still requiring better than coin-flip
confidence). Rounds stop when nothing qualifies, the pool empties, or
max_iter is hit. Instances never promoted stay out of training. Every
promotion lands in an audit trail.

The round-0 fit uses the base seed unchanged, so with an empty
unlabelled pool the result is bit-identical to plain supervised
training; later refits derive fresh seeds from (base seed, round).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ._util import seed_from
from .classifiers import ClassifierSpec, TrainedModel, train
from .corpus import Label

CRITERIA = ("threshold", "k_best")

AUDIT_HEADER = "iteration,pair_id,pseudo_label,confidence"


@dataclass(frozen=True)
class SelfTrainingSpec:
    base: ClassifierSpec
    criterion: str = "threshold"
    threshold: float = 0.75
    k_best: int = 5
    max_iter: int = 10

    def __post_init__(self) -> None:
        if self.criterion not in CRITERIA:
            raise ValueError(f"criterion must be one of {CRITERIA}, "
                             f"got {self.criterion!r}")
        if not 0.5 <= self.threshold <= 1.0:
            raise ValueError(f"threshold must lie in [0.5, 1], got {self.threshold}")
        if self.k_best < 1:
            raise ValueError(f"k_best must be >= 1, got {self.k_best}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")

    def key(self) -> str:
        if self.criterion == "threshold":
            own = f"st:criterion=threshold,threshold={self.threshold!r}"
        else:
            own = f"st:criterion=k_best,k_best={self.k_best}"
        return f"{own},max_iter={self.max_iter}|{self.base.key()}"


@dataclass(frozen=True)
class PromotionRecord:
    """One pseudo-labelled instance entering the training pool."""

    iteration: int
    pair_id: str
    pseudo_label: Label
    confidence: float


def _select(proba: np.ndarray, spec: SelfTrainingSpec) -> np.ndarray:
    """Indices promoted this round, in a deterministic order."""
    conf = proba.max(axis=1)
    if spec.criterion == "threshold":
        return np.nonzero(conf >= spec.threshold)[0]
    eligible = np.nonzero(conf > 0.5)[0]
    if eligible.size <= spec.k_best:
        return eligible
    # k most confident; ties resolve to the lowest index
    order = np.lexsort((eligible, -conf[eligible]))
    return np.sort(eligible[order[:spec.k_best]])


def self_train(
    spec: SelfTrainingSpec,
    x_lab: np.ndarray,
    y_lab: np.ndarray,
    x_unlab: np.ndarray,
    unlab_ids: Sequence[str] | None = None,
) -> tuple[TrainedModel, list[PromotionRecord]]:
    """Run the pseudo-labelling loop; returns the final model and audit."""
    x_lab = np.asarray(x_lab, dtype=np.float64)
    x_unlab = np.asarray(x_unlab, dtype=np.float64)
    if x_unlab.ndim != 2 or (len(x_unlab) and x_unlab.shape[1] != x_lab.shape[1]):
        raise ValueError(
            f"unlabelled width {x_unlab.shape} does not match {x_lab.shape}")
    if np.isnan(x_unlab).any():
        raise ValueError("NaN in unlabelled feature matrix")
    if unlab_ids is None:
        unlab_ids = [str(i) for i in range(len(x_unlab))]
    if len(unlab_ids) != len(x_unlab):
        raise ValueError(f"{len(unlab_ids)} ids for {len(x_unlab)} rows")
    ids = np.asarray(unlab_ids, dtype=object)

    cur_x, cur_y = x_lab, np.asarray(y_lab)
    model = train(spec.base, cur_x, cur_y)
    audit: list[PromotionRecord] = []
    pool_x, pool_ids = x_unlab, ids
    for round_no in range(1, spec.max_iter + 1):
        if len(pool_x) == 0:
            break
        proba = model.predict_proba(pool_x)
        chosen = _select(proba, spec)
        if chosen.size == 0:
            break
        pseudo = model.predict(pool_x[chosen])
        conf = proba[chosen].max(axis=1)
        for pid, lab, c in zip(pool_ids[chosen], pseudo, conf):
            audit.append(PromotionRecord(round_no, str(pid), Label(int(lab)),
                                         float(c)))
        cur_x = np.vstack([cur_x, pool_x[chosen]])
        cur_y = np.concatenate([cur_y, pseudo])
        keep = np.setdiff1d(np.arange(len(pool_x)), chosen,
                            assume_unique=True)
        pool_x, pool_ids = pool_x[keep], pool_ids[keep]
        refit_seed = seed_from(spec.base.seed, "st-iter", round_no)
        model = train(spec.base.with_seed(refit_seed), cur_x, cur_y)
    return model, audit


# ---------------------------------------------------------------------------
# Audit trail CSV


def write_audit_csv(records: Sequence[PromotionRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(AUDIT_HEADER + "\n")
        for r in records:
            fh.write(f"{r.iteration},{r.pair_id},{r.pseudo_label},"
                     f"{r.confidence!r}\n")


def read_audit_csv(path: str | Path) -> list[PromotionRecord]:
    path = Path(path)
    records: list[PromotionRecord] = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != AUDIT_HEADER:
            raise ValueError(f"{path}:1: expected header {AUDIT_HEADER!r}")
        for lineno, raw in enumerate(fh, start=2):
            line = raw.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 fields")
            records.append(PromotionRecord(
                int(parts[0]), parts[1], Label.from_str(parts[2]),
                float(parts[3])))
    return records
