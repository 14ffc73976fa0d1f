"""Tests for the nested cross-validation sweep runner."""

import numpy as np
import pytest

from flussl._util import seed_from
from flussl.classifiers import train
from flussl.experiment import (
    POOLED,
    POOLED_CLASS,
    RunSettings,
    _assert_no_leakage,
    build_candidates,
    list_cells,
    run_experiment,
)
from flussl.features import featurize_corpus
from flussl.folds import make_folds
from flussl.grids import rf_grid
from flussl.metrics import f1_score
from flussl.synthetic import SyntheticSpec, make_synthetic

EASY = SyntheticSpec(strains_per_subtype=12, noise_scale=0.15, dim=10)

# single-subtype two-cluster geometry with overlap: scarce labels hurt,
# and half the pairs form a genuine unlabelled pool carrying usable structure
TREND = SyntheticSpec(subtypes=("H3N2",), strains_per_subtype=29,
                      cluster_coords=(0, 2), noise_scale=1.2, dim=8,
                      labelled_fraction=0.5)
TREND_ST = {"st_criteria": ("threshold",), "st_thresholds": (0.6,),
            "st_max_iters": (3,)}

RF_SMALL = {"rf_n_estimators": (15,), "rf_max_depths": (None,)}
ST_SMALL = {"st_criteria": ("threshold",), "st_thresholds": (0.7,),
            "st_max_iters": (3,)}


def settings(**kw) -> RunSettings:
    defaults = dict(paradigms=("supervised",), learners=("rf",),
                    ratios=(1.0,), seed=5, n_resamples=50, **RF_SMALL)
    defaults.update(kw)
    return RunSettings(**defaults)


class TestSettingsValidation:
    def test_rejects_unknown_axes(self):
        with pytest.raises(ValueError, match="paradigm"):
            settings(paradigms=("clustering",))
        with pytest.raises(ValueError, match="learner"):
            settings(learners=("mlp",))
        with pytest.raises(ValueError, match="ratio"):
            settings(ratios=(0.3,))
        with pytest.raises(ValueError, match="combine"):
            settings(combine="sum")
        with pytest.raises(ValueError, match="threads"):
            settings(threads=0)
        with pytest.raises(ValueError, match="duplicate"):
            settings(ratios=(1.0, 1.0))

    def test_learners_optional_for_pure_label_spreading(self):
        s = settings(paradigms=("label_spreading",), learners=())
        assert s.learners == ()
        with pytest.raises(ValueError, match="need learners"):
            settings(paradigms=("supervised",), learners=())


class TestCellEnumeration:
    def test_matrix_shape_and_order(self):
        s = settings(paradigms=("supervised", "label_spreading"),
                     learners=("rf", "svm"), ratios=(0.25, 1.0))
        cells = list_cells(["b", "a"], s)
        assert len(cells) == 2 * (2 + 1) * 2
        assert cells[0].embedding == "a"  # embeddings sorted
        keys = [c.key() for c in cells]
        assert len(set(keys)) == len(keys)
        graph = [c for c in cells if c.paradigm == "label_spreading"]
        assert all(c.learner == "knn" for c in graph)

    def test_grid_overrides_flow_through(self):
        s = settings(**ST_SMALL)
        assert len(build_candidates("supervised", "rf", s)) == 1
        assert len(build_candidates("self_training", "rf", s)) == 1
        default = RunSettings()
        assert len(build_candidates("supervised", "rf", default)) == 25
        assert len(build_candidates("label_spreading", "knn",
                                    default)) == 210


class TestLeakageAudit:
    def test_overlap_raises(self):
        with pytest.raises(AssertionError, match="leaked into the pool"):
            _assert_no_leakage(np.array([1, 2, 3]),
                               {"the pool": np.array([3, 4])})
        _assert_no_leakage(np.array([1, 2]), {"the pool": np.array([3])})

    def test_full_run_counts_every_fold(self):
        data = make_synthetic(EASY, seed=1)
        s = settings(ratios=(0.25, 1.0))
        result = run_experiment(data.corpus, [data.store], s)
        assert result.failed_cells() == []
        # every outer fold audited once plus once per usable inner fold
        expected = sum(1 + rec.n_inner_used
                       for cell in result.cells for rec in cell.folds)
        assert result.total_leakage_checks() == expected
        full = result.cell(data.spec.model_name, "supervised", "rf", 1.0)
        assert all(rec.n_inner_used == s.inner_k for rec in full.folds)


class TestSupervisedOracle:
    def test_matches_hand_rolled_nested_cv(self):
        data = make_synthetic(EASY, seed=2)
        s = settings()
        result = run_experiment(data.corpus, [data.store], s)
        cell = result.cell(data.spec.model_name, "supervised", "rf", 1.0)
        assert not cell.failed

        # independent re-run of the declared procedure
        pairs = data.corpus.labelled()
        x, y = featurize_corpus(data.store, pairs, s.combine)
        subs = np.array([p.subtype for p in pairs])
        plan = make_folds(y, subs, seed_from(s.seed, "folds"),
                          s.outer_k, s.inner_k)
        spec = rf_grid((15,), (None,))[0]
        per_fold = {}
        for fold_no, fold in enumerate(plan.outer):
            retained = np.sort(fold.train)  # ratio 1.0 keeps everything
            seed = seed_from(s.seed, "fit", fold_no, 1.0, "final",
                             spec.key())
            model = train(spec.with_seed(seed), x[retained], y[retained])
            y_hat = model.predict(x[fold.test])
            for sub in np.unique(subs[fold.test]):
                pick = subs[fold.test] == sub
                per_fold.setdefault(str(sub), []).append(
                    f1_score(y[fold.test][pick], y_hat[pick]))
        for sub, scores in per_fold.items():
            row = cell.row(sub)
            assert row.per_fold == tuple(scores)
            assert row.mean_f1 == float(np.mean(scores))

    def test_row_invariants(self):
        data = make_synthetic(EASY, seed=3)
        s = settings(ratios=(0.5,))
        result = run_experiment(data.corpus, [data.store], s)
        cell = result.cells[0]
        scopes = [r.scope for r in cell.rows]
        assert scopes == ["H1N1", "H3N2", POOLED, POOLED_CLASS]
        for row in cell.rows:
            assert len(row.per_fold) == s.outer_k
            assert row.ci_low <= row.mean_f1 <= row.ci_high
        assert len(cell.folds) == s.outer_k
        for rec in cell.folds:
            assert rec.chosen.startswith("rf:")
            assert rec.promotions == ()
            assert rec.n_retained + rec.n_pul + rec.n_test == len(
                data.corpus.labelled())


class TestSelfTrainingReduction:
    def test_empty_pool_reproduces_supervised_f1(self):
        # fully labelled corpus at ratio 1.0: no pool anywhere
        data = make_synthetic(EASY, seed=4)
        s = settings(paradigms=("supervised", "self_training"),
                     rf_n_estimators=(10, 25), **ST_SMALL)
        result = run_experiment(data.corpus, [data.store], s)
        assert result.failed_cells() == []
        sup = result.cell(data.spec.model_name, "supervised", "rf", 1.0)
        st = result.cell(data.spec.model_name, "self_training", "rf", 1.0)
        for sup_row, st_row in zip(sup.rows, st.rows):
            assert sup_row.scope == st_row.scope
            assert sup_row.per_fold == st_row.per_fold
            assert sup_row.mean_f1 == st_row.mean_f1
        for sup_rec, st_rec in zip(sup.folds, st.folds):
            assert st_rec.chosen.endswith(sup_rec.chosen)
            assert st_rec.promotions == ()

    def test_masks_shared_across_paradigms(self):
        data = make_synthetic(EASY, seed=6)
        s = settings(paradigms=("supervised", "self_training"),
                     ratios=(0.25,), **ST_SMALL)
        result = run_experiment(data.corpus, [data.store], s)
        sup = result.cell(data.spec.model_name, "supervised", "rf", 0.25)
        st = result.cell(data.spec.model_name, "self_training", "rf", 0.25)
        for a, b in zip(sup.folds, st.folds):
            assert (a.n_retained, a.n_pul) == (b.n_retained, b.n_pul)


class TestSelfTrainingBenefit:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_pseudo_labels_help_under_scarcity(self, seed):
        data = make_synthetic(TREND, seed=seed)
        s = settings(paradigms=("supervised", "self_training"),
                     ratios=(0.25,), seed=seed, n_resamples=10, **TREND_ST)
        result = run_experiment(data.corpus, [data.store], s)
        assert result.failed_cells() == []
        sup = result.cell(data.spec.model_name, "supervised", "rf", 0.25)
        st = result.cell(data.spec.model_name, "self_training", "rf", 0.25)
        assert st.row(POOLED).mean_f1 > sup.row(POOLED).mean_f1
        assert any(fold.promotions for fold in st.folds)

    def test_audit_names_real_pairs(self):
        spec = SyntheticSpec(subtypes=("H3N2",), strains_per_subtype=14,
                             cluster_coords=(0, 3), noise_scale=0.4,
                             dim=8, labelled_fraction=0.8)
        data = make_synthetic(spec, seed=9)
        s = settings(paradigms=("self_training",), ratios=(0.25,),
                     st_criteria=("k_best",), st_k_bests=(5,),
                     st_max_iters=(2,))
        result = run_experiment(data.corpus, [data.store], s)
        assert result.failed_cells() == []
        cell = result.cells[0]
        known = {p.key for p in data.corpus.pairs}
        promoted = [rec for fold in cell.folds for rec in fold.promotions]
        assert promoted, "expected promotions on this fixture"
        for rec in promoted:
            assert rec.pair_id in known
            assert int(rec.pseudo_label) in (0, 1)
            assert 0.5 < rec.confidence <= 1.0


class TestLabelSpreading:
    def test_transductive_cell_scores_well(self):
        data = make_synthetic(EASY, seed=8)
        s = settings(paradigms=("label_spreading",), learners=(),
                     ratios=(0.5,), ls_alphas=(0.2,), ls_n_neighbors=(5,),
                     ls_max_iters=(30,))
        result = run_experiment(data.corpus, [data.store], s)
        assert result.failed_cells() == []
        cell = result.cells[0]
        assert cell.learner == "knn"
        assert cell.row(POOLED).mean_f1 > 0.8
        for rec in cell.folds:
            assert rec.graph_converged is True
            assert rec.chosen.startswith("ls:")

    def test_impossible_neighbour_count_fails_cell_only(self):
        data = make_synthetic(EASY, seed=8)
        s = settings(paradigms=("supervised", "label_spreading"),
                     ls_alphas=(0.2,), ls_n_neighbors=(5000,),
                     ls_max_iters=(30,))
        result = run_experiment(data.corpus, [data.store], s)
        failed = result.cell(data.spec.model_name, "label_spreading",
                             "knn", 1.0)
        good = result.cell(data.spec.model_name, "supervised", "rf", 1.0)
        assert failed.failed
        assert "outer fold 0" in failed.error
        assert "every configuration failed" in failed.error
        assert not good.failed and good.rows


class TestDeterminism:
    def test_identical_runs_identical_results(self):
        data = make_synthetic(EASY, seed=10)
        s = settings(paradigms=("supervised", "self_training"),
                     ratios=(0.25, 1.0), **ST_SMALL)
        first = run_experiment(data.corpus, [data.store], s)
        second = run_experiment(data.corpus, [data.store], s)
        assert first == second

    def test_thread_count_never_changes_results(self):
        data = make_synthetic(EASY, seed=11)
        serial = settings(paradigms=("supervised", "self_training"),
                          ratios=(0.25, 0.75), **ST_SMALL)
        threaded = settings(paradigms=("supervised", "self_training"),
                            ratios=(0.25, 0.75), threads=4, **ST_SMALL)
        a = run_experiment(data.corpus, [data.store], serial)
        b = run_experiment(data.corpus, [data.store], threaded)
        assert a == b

    def test_seed_changes_results(self):
        data = make_synthetic(TREND, seed=12)
        a = run_experiment(data.corpus, [data.store],
                           settings(ratios=(0.25,), seed=1, n_resamples=10))
        b = run_experiment(data.corpus, [data.store],
                           settings(ratios=(0.25,), seed=2, n_resamples=10))
        folds_a = [r.per_fold for c in a.cells for r in c.rows]
        folds_b = [r.per_fold for c in b.cells for r in c.rows]
        assert folds_a != folds_b


class TestMonotoneSupervision:
    def test_more_labels_rarely_hurt(self):
        spec = SyntheticSpec(subtypes=("H3N2",), strains_per_subtype=14,
                             cluster_coords=(0, 3), noise_scale=0.5,
                             dim=8)
        violations = 0
        for seed in range(10):
            data = make_synthetic(spec, seed=seed)
            s = settings(outer_k=3, inner_k=2, ratios=(0.25, 1.0),
                         seed=seed)
            result = run_experiment(data.corpus, [data.store], s)
            name = spec.model_name
            scarce = result.cell(name, "supervised", "rf", 0.25)
            full = result.cell(name, "supervised", "rf", 1.0)
            if full.row(POOLED).mean_f1 < scarce.row(POOLED).mean_f1:
                violations += 1
        assert violations <= 1
