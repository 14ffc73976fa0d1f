"""Nested cross-validation sweep over embeddings, paradigms, and ratios.

One cell is an (embedding, paradigm, learner, ratio) combination. Every
cell sees the same outer/inner fold plan and the same per-(fold, ratio)
label masks, so paradigms compete on identical data. Masked-out
training pairs stay feature-only in every training path; the
semi-supervised paradigms receive them, together with the genuinely
unlabelled corpus, as an unlabelled pool. A hash-set audit checks on
every fold, inner and outer, that no test index reaches a
training-visible pool (label spreading additionally sees test features,
never test labels, as transductive graph nodes).

All randomness derives from the master seed plus structural coordinates
(fold, ratio, fit scope, base configuration), never from execution
order, so a threaded sweep is bit-identical to a serial one. Fit seeds
deliberately exclude the paradigm name: a semi-supervised run whose
unlabelled pools are empty collapses, bit for bit, to the supervised
run of the same base configuration.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ._util import seed_from
from .classifiers import ClassifierSpec, train
from .corpus import Corpus
from .features import COMBINE_MODES, EmbeddingStore, featurize_corpus
from .folds import INNER_K, OUTER_K, RATIOS, make_folds, mask_labels
from .grids import (
    LS_ALPHAS,
    LS_MAX_ITERS,
    LS_N_NEIGHBORS,
    RF_MAX_DEPTHS,
    RF_N_ESTIMATORS,
    ST_CRITERIA,
    ST_K_BEST,
    ST_MAX_ITERS,
    ST_THRESHOLDS,
    grid_search,
    label_spreading_grid,
    rf_grid,
    self_training_grid,
    svm_grid,
)
from .labelspread import LabelSpreadingSpec, build_knn_graph, label_spread, one_hot
from .metrics import (
    N_RESAMPLES,
    bootstrap_ci_folds,
    bootstrap_ci_grouped,
    f1_score,
    macro_class_f1,
)
from .selftraining import PromotionRecord, SelfTrainingSpec, self_train

PARADIGMS = ("supervised", "self_training", "label_spreading")
LEARNERS = ("rf", "svm")
GRAPH_LEARNER = "knn"
POOLED = "pooled"
POOLED_CLASS = "pooled_class_macro"


@dataclass(frozen=True)
class RunSettings:
    """Sweep shape and search-grid overrides (None keeps the full grid)."""

    paradigms: tuple[str, ...] = PARADIGMS
    learners: tuple[str, ...] = LEARNERS
    ratios: tuple[float, ...] = RATIOS
    seed: int = 0
    combine: str = "absdiff-mean"
    outer_k: int = OUTER_K
    inner_k: int = INNER_K
    n_resamples: int = N_RESAMPLES
    threads: int = 1
    rf_n_estimators: tuple[int, ...] | None = None
    rf_max_depths: tuple[int | None, ...] | None = None
    svm_cs: tuple[float, ...] | None = None
    svm_gammas: tuple[float, ...] | None = None
    st_criteria: tuple[str, ...] | None = None
    st_thresholds: tuple[float, ...] | None = None
    st_k_bests: tuple[int, ...] | None = None
    st_max_iters: tuple[int, ...] | None = None
    ls_alphas: tuple[float, ...] | None = None
    ls_n_neighbors: tuple[int, ...] | None = None
    ls_max_iters: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if not self.paradigms:
            raise ValueError("need at least one paradigm")
        unknown = [p for p in self.paradigms if p not in PARADIGMS]
        if unknown:
            raise ValueError(f"unknown paradigms {unknown}")
        if len(set(self.paradigms)) != len(self.paradigms):
            raise ValueError(f"duplicate paradigms in {self.paradigms}")
        needs_learner = [p for p in self.paradigms
                         if p != "label_spreading"]
        if needs_learner and not self.learners:
            raise ValueError(f"paradigms {needs_learner} need learners")
        bad = [l for l in self.learners if l not in LEARNERS]
        if bad:
            raise ValueError(f"unknown learners {bad}")
        if len(set(self.learners)) != len(self.learners):
            raise ValueError(f"duplicate learners in {self.learners}")
        if not self.ratios:
            raise ValueError("need at least one ratio")
        bad_r = [r for r in self.ratios if r not in RATIOS]
        if bad_r:
            raise ValueError(f"ratios {bad_r} not in {RATIOS}")
        if len(set(self.ratios)) != len(self.ratios):
            raise ValueError(f"duplicate ratios in {self.ratios}")
        if self.combine not in COMBINE_MODES:
            raise ValueError(f"unknown combine mode {self.combine!r}")
        if self.outer_k < 2 or self.inner_k < 2:
            raise ValueError("outer_k and inner_k must be at least 2")
        if self.n_resamples < 1:
            raise ValueError("n_resamples must be positive")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError(f"seed out of range: {self.seed}")


@dataclass(frozen=True)
class CellKey:
    """Coordinates of one experiment cell."""

    embedding: str
    paradigm: str
    learner: str
    ratio: float

    def key(self) -> str:
        return (f"{self.embedding}/{self.paradigm}/{self.learner}/"
                f"ratio={self.ratio!r}")


@dataclass
class ScoreRow:
    """One aggregation scope of a cell: a subtype, or a pooled view."""

    scope: str
    mean_f1: float
    ci_low: float
    ci_high: float
    per_fold: tuple[float, ...]


@dataclass
class FoldRecord:
    """What happened on one outer fold of a cell."""

    fold_no: int
    chosen: str
    best_inner_mean: float
    n_retained: int
    n_pul: int
    n_test: int
    n_inner_used: int = 0
    promotions: tuple[PromotionRecord, ...] = ()
    graph_converged: bool | None = None
    grid_failures: tuple[tuple[str, str], ...] = ()


@dataclass
class CellResult:
    """Scores and per-fold diagnostics for one cell, or its failure."""

    embedding: str
    paradigm: str
    learner: str
    ratio: float
    rows: list[ScoreRow] = field(default_factory=list)
    folds: list[FoldRecord] = field(default_factory=list)
    leakage_checks: int = 0
    failed: bool = False
    error: str | None = None

    def key(self) -> str:
        return CellKey(self.embedding, self.paradigm, self.learner,
                       self.ratio).key()

    def row(self, scope: str) -> ScoreRow:
        for row in self.rows:
            if row.scope == scope:
                return row
        raise KeyError(f"cell {self.key()} has no scope {scope!r}")


@dataclass
class RunResult:
    """Full sweep outcome: one CellResult per cell, in a fixed order."""

    seed: int
    combine: str
    outer_k: int
    inner_k: int
    stratified_by: str
    ratios: tuple[float, ...]
    embeddings: tuple[str, ...]
    cells: list[CellResult]

    def cell(self, embedding: str, paradigm: str, learner: str,
             ratio: float) -> CellResult:
        for c in self.cells:
            if (c.embedding, c.paradigm, c.learner, c.ratio) == \
                    (embedding, paradigm, learner, float(ratio)):
                return c
        raise KeyError(
            f"no cell {embedding}/{paradigm}/{learner}/ratio={ratio!r}")

    def failed_cells(self) -> list[str]:
        return [c.key() for c in self.cells if c.failed]

    def total_leakage_checks(self) -> int:
        return sum(c.leakage_checks for c in self.cells)


@dataclass
class _SweepContext:
    """Shared, read-only inputs every cell works from."""

    settings: RunSettings
    y_lab: np.ndarray
    subtypes: np.ndarray
    lab_ids: np.ndarray
    unlab_ids: np.ndarray
    features: dict[str, tuple[np.ndarray, np.ndarray]]
    plan: object
    masks: dict[tuple[int, float], object]


def _pick(value, default):
    return default if value is None else value


def build_candidates(paradigm: str, learner: str,
                     settings: RunSettings) -> list:
    """The hyperparameter grid one cell searches."""
    if paradigm == "label_spreading":
        return label_spreading_grid(
            _pick(settings.ls_alphas, LS_ALPHAS),
            _pick(settings.ls_n_neighbors, LS_N_NEIGHBORS),
            _pick(settings.ls_max_iters, LS_MAX_ITERS))
    if learner == "rf":
        base = rf_grid(_pick(settings.rf_n_estimators, RF_N_ESTIMATORS),
                       _pick(settings.rf_max_depths, RF_MAX_DEPTHS))
    else:
        base = svm_grid(settings.svm_cs, settings.svm_gammas)
    if paradigm == "supervised":
        return base
    return self_training_grid(
        base,
        thresholds=_pick(settings.st_thresholds, ST_THRESHOLDS),
        criteria=_pick(settings.st_criteria, ST_CRITERIA),
        k_bests=_pick(settings.st_k_bests, ST_K_BEST),
        max_iters=_pick(settings.st_max_iters, ST_MAX_ITERS))


def list_cells(embeddings: Sequence[str],
               settings: RunSettings) -> list[CellKey]:
    """Deterministic cell enumeration: embedding, paradigm, learner, ratio."""
    cells = []
    for name in sorted(embeddings):
        for paradigm in settings.paradigms:
            learners = ((GRAPH_LEARNER,) if paradigm == "label_spreading"
                        else settings.learners)
            for learner in learners:
                for ratio in settings.ratios:
                    cells.append(CellKey(name, paradigm, learner,
                                         float(ratio)))
    return cells


def _assert_no_leakage(test_idx: np.ndarray,
                       pools: Mapping[str, np.ndarray]) -> None:
    """Raise if any test index appears in a training-visible pool.

    Raised explicitly (not via the assert statement) so the audit also
    runs under python -O.
    """
    test = {int(i) for i in test_idx}
    for name, pool in pools.items():
        overlap = test.intersection(int(i) for i in pool)
        if overlap:
            raise AssertionError(
                f"test indices leaked into {name}: {sorted(overlap)[:5]}")


def _base_key(spec) -> str:
    """Configuration key used for fit-seed derivation.

    Self-training shares its base learner's key so that, with empty
    pools, it trains the exact model the supervised paradigm trains.
    """
    if isinstance(spec, SelfTrainingSpec):
        return spec.base.key()
    return spec.key()


def _fit_seed(master: int, fold_no: int, ratio: float, scope: str,
              base_key: str) -> int:
    return seed_from(master, "fit", fold_no, ratio, scope, base_key)


def _fit_predict(
    ck: CellKey,
    ctx: _SweepContext,
    spec,
    fold_no: int,
    scope: str,
    train_idx: np.ndarray,
    test_idx: np.ndarray,
    pool_idx: np.ndarray,
    x_lab: np.ndarray,
    x_unlab: np.ndarray,
    want_audit: bool = False,
):
    """Train one configuration and predict the test rows.

    train_idx rows keep their labels. pool_idx rows and the genuine
    unlabelled corpus are feature-only. Test rows are never trained on;
    label spreading alone sees them as unlabelled graph nodes and reads
    their predictions off the converged score matrix.

    Returns (y_pred, promotion audit or None, graph-converged or None).
    """
    y = ctx.y_lab
    if ck.paradigm == "label_spreading":
        nodes = np.vstack([x_lab[train_idx], x_lab[test_idx],
                           x_lab[pool_idx], x_unlab])
        y_nodes = np.full(len(nodes), -1, dtype=np.int64)
        y_nodes[:len(train_idx)] = y[train_idx]
        graph = build_knn_graph(nodes, spec.n_neighbors)
        result = label_spread(spec, graph, one_hot(y_nodes))
        start = len(train_idx)
        y_pred = result.labels[start:start + len(test_idx)].astype(np.int64)
        return y_pred, None, result.converged
    seed = _fit_seed(ctx.settings.seed, fold_no, ck.ratio, scope,
                     _base_key(spec))
    if ck.paradigm == "supervised":
        model = train(spec.with_seed(seed), x_lab[train_idx], y[train_idx])
        return model.predict(x_lab[test_idx]), None, None
    pool_x = np.vstack([x_lab[pool_idx], x_unlab])
    ids = None
    if want_audit:
        ids = [str(i) for i in ctx.lab_ids[pool_idx]] + \
            [str(i) for i in ctx.unlab_ids]
    seeded = dataclasses.replace(spec, base=spec.base.with_seed(seed))
    model, audit = self_train(seeded, x_lab[train_idx], y[train_idx],
                              pool_x, ids)
    return model.predict(x_lab[test_idx]), audit, None


def _usable_inner_folds(ctx: _SweepContext, fold_no: int, mask):
    """Inner folds restricted to retained labels, dropping unusable ones.

    A fold is unusable when its retained training part lacks a class or
    its retained test part is empty, which low ratios can cause. The
    pseudo-unlabelled pool is restricted to the inner training side so
    nothing from an inner test set enters training in any form.
    """
    out = []
    for j, inner in enumerate(ctx.plan.inner[fold_no]):
        tr = np.intersect1d(inner.train, mask.retained)
        te = np.intersect1d(inner.test, mask.retained)
        if te.size == 0 or np.unique(ctx.y_lab[tr]).size < 2:
            continue
        pool = np.intersect1d(inner.train, mask.pul)
        out.append((j, tr, te, pool))
    return out


def _score_rows(ck: CellKey, outcomes, settings: RunSettings) -> list[ScoreRow]:
    """Per-subtype rows plus the two pooled aggregations.

    pooled is the macro average over subtypes of the binary F1;
    pooled_class_macro macro-averages the per-class one-vs-rest F1 over
    the whole test set instead.
    """
    rows = []
    all_subs = sorted({str(s) for _, _, subs in outcomes for s in subs})
    for sub in all_subs:
        folds = [(t[subs == sub], p[subs == sub])
                 for t, p, subs in outcomes if (subs == sub).any()]
        per_fold = tuple(f1_score(t, p) for t, p in folds)
        low, high = bootstrap_ci_folds(
            folds, settings.n_resamples,
            seed=seed_from(settings.seed, "ci", ck.key(), sub))
        rows.append(ScoreRow(sub, float(np.mean(per_fold)), low, high,
                             per_fold))
    per_fold_macro = tuple(
        float(np.mean([f1_score(t[subs == s], p[subs == s])
                       for s in np.unique(subs)]))
        for t, p, subs in outcomes)
    low, high = bootstrap_ci_grouped(
        outcomes, settings.n_resamples,
        seed=seed_from(settings.seed, "ci", ck.key(), POOLED))
    rows.append(ScoreRow(POOLED, float(np.mean(per_fold_macro)), low, high,
                         per_fold_macro))
    per_fold_cm = tuple(macro_class_f1(t, p) for t, p, _ in outcomes)
    low, high = bootstrap_ci_folds(
        [(t, p) for t, p, _ in outcomes], settings.n_resamples,
        seed=seed_from(settings.seed, "ci", ck.key(), POOLED_CLASS),
        stat=macro_class_f1)
    rows.append(ScoreRow(POOLED_CLASS, float(np.mean(per_fold_cm)), low,
                         high, per_fold_cm))
    return rows


def _execute_cell(ck: CellKey, ctx: _SweepContext, out: CellResult) -> None:
    settings = ctx.settings
    x_lab, x_unlab = ctx.features[ck.embedding]
    candidates = build_candidates(ck.paradigm, ck.learner, settings)
    outcomes = []
    for fold_no, fold in enumerate(ctx.plan.outer):
        try:
            mask = ctx.masks[(fold_no, ck.ratio)]
            _assert_no_leakage(fold.test, {
                "the retained-labelled set": mask.retained,
                "the pseudo-unlabelled pool": mask.pul,
            })
            out.leakage_checks += 1
            prepared = _usable_inner_folds(ctx, fold_no, mask)
            for j, tr, te, pool in prepared:
                _assert_no_leakage(te, {
                    f"inner fold {j}'s training set": tr,
                    f"inner fold {j}'s pseudo-unlabelled pool": pool,
                })
                out.leakage_checks += 1
            if not prepared:
                raise RuntimeError(
                    "no usable inner fold: every split lost a class or "
                    "all its test labels")

            def evaluate(spec, prepared=prepared, fold_no=fold_no):
                scores = []
                for j, tr, te, pool in prepared:
                    y_hat, _, _ = _fit_predict(
                        ck, ctx, spec, fold_no, f"inner{j}", tr, te,
                        pool, x_lab, x_unlab)
                    scores.append(f1_score(ctx.y_lab[te], y_hat))
                return scores

            picked = grid_search(candidates, evaluate)
            y_hat, audit, converged = _fit_predict(
                ck, ctx, picked.best, fold_no, "final", mask.retained,
                fold.test, mask.pul, x_lab, x_unlab,
                want_audit=ck.paradigm == "self_training")
            outcomes.append((ctx.y_lab[fold.test], y_hat,
                             ctx.subtypes[fold.test]))
            out.folds.append(FoldRecord(
                fold_no=fold_no,
                chosen=picked.best.key(),
                best_inner_mean=picked.best_mean,
                n_retained=int(mask.retained.size),
                n_pul=int(mask.pul.size),
                n_test=int(fold.test.size),
                n_inner_used=len(prepared),
                promotions=tuple(audit or ()),
                graph_converged=converged,
                grid_failures=tuple(sorted(picked.failures.items())),
            ))
        except Exception as exc:
            raise RuntimeError(
                f"outer fold {fold_no}: {type(exc).__name__}: {exc}"
            ) from exc
    out.rows = _score_rows(ck, outcomes, settings)


def _run_cell(ck: CellKey, ctx: _SweepContext) -> CellResult:
    out = CellResult(ck.embedding, ck.paradigm, ck.learner, ck.ratio)
    try:
        _execute_cell(ck, ctx, out)
    except Exception as exc:  # noqa: BLE001 - cell failures are recorded
        out.failed = True
        out.error = str(exc)
        out.rows = []
    return out


def run_experiment(
    corpus: Corpus,
    stores: Sequence[EmbeddingStore] | Mapping[str, EmbeddingStore],
    settings: RunSettings | None = None,
) -> RunResult:
    """Run the full sweep and collect one CellResult per cell.

    The fold plan and the per-(fold, ratio) masks are drawn once and
    shared by every cell. Cells run independently (optionally on a
    thread pool) and are merged in enumeration order, so the result is
    identical for any thread count.
    """
    settings = settings or RunSettings()
    if isinstance(stores, Mapping):
        stores = list(stores.values())
    else:
        stores = list(stores)
    if not stores:
        raise ValueError("need at least one embedding store")
    names = [st.model_name for st in stores]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate embedding model names in {names}")

    lab_pairs = corpus.labelled()
    unlab_pairs = corpus.unlabelled()
    if not lab_pairs:
        raise ValueError("corpus has no labelled pairs")
    y_lab = np.array([int(p.label) for p in lab_pairs], dtype=np.int64)
    subtypes = np.array([p.subtype for p in lab_pairs])
    lab_ids = np.array([p.key for p in lab_pairs], dtype=object)
    unlab_ids = np.array([p.key for p in unlab_pairs], dtype=object)

    plan = make_folds(y_lab, subtypes, seed_from(settings.seed, "folds"),
                      settings.outer_k, settings.inner_k)
    masks = {}
    for fold_no, fold in enumerate(plan.outer):
        for ratio in settings.ratios:
            masks[(fold_no, float(ratio))] = mask_labels(
                fold.train, y_lab, ratio,
                seed_from(settings.seed, "mask", fold_no, ratio))

    features = {}
    for st in stores:
        x_lab, _ = featurize_corpus(st, lab_pairs, settings.combine)
        x_unlab, _ = featurize_corpus(st, unlab_pairs, settings.combine)
        features[st.model_name] = (x_lab, x_unlab)

    ctx = _SweepContext(settings, y_lab, subtypes, lab_ids, unlab_ids,
                        features, plan, masks)
    cells = list_cells(list(features), settings)

    if settings.threads > 1:
        with ThreadPoolExecutor(max_workers=settings.threads) as pool:
            results = list(pool.map(lambda ck: _run_cell(ck, ctx), cells))
    else:
        results = [_run_cell(ck, ctx) for ck in cells]

    return RunResult(
        seed=settings.seed,
        combine=settings.combine,
        outer_k=plan.outer_k,
        inner_k=plan.inner_k,
        stratified_by=plan.stratified_by,
        ratios=tuple(float(r) for r in settings.ratios),
        embeddings=tuple(sorted(features)),
        cells=results,
    )
