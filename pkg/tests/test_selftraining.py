"""Tests for iterative pseudo-label promotion."""

import numpy as np
import pytest

from flussl.classifiers import ClassifierSpec, model_digest, train
from flussl.corpus import Label
from flussl.selftraining import (
    PromotionRecord,
    SelfTrainingSpec,
    _select,
    read_audit_csv,
    self_train,
    write_audit_csv,
)

RF = ClassifierSpec("rf", n_estimators=25, seed=11)
SVM = ClassifierSpec("svm", c=5.0, gamma=0.5, seed=11)


def blob_pools(rng, n_lab_per=2, n_unlab=50, gap=8.0, dim=2):
    """Well-separated blobs: a few labelled points plus an unlabelled pool."""
    half = n_unlab // 2
    lab_x = np.vstack([rng.normal(size=(n_lab_per, dim)) - gap / 2,
                       rng.normal(size=(n_lab_per, dim)) + gap / 2])
    lab_y = np.array([0] * n_lab_per + [1] * n_lab_per)
    unlab = np.vstack([rng.normal(size=(half, dim)) - gap / 2,
                       rng.normal(size=(n_unlab - half, dim)) + gap / 2])
    truth = np.array([0] * half + [1] * (n_unlab - half))
    return lab_x, lab_y, unlab, truth


class TestSpecValidation:
    def test_ranges(self):
        with pytest.raises(ValueError, match="criterion"):
            SelfTrainingSpec(RF, criterion="best")
        with pytest.raises(ValueError, match="threshold"):
            SelfTrainingSpec(RF, threshold=0.4)
        with pytest.raises(ValueError, match="threshold"):
            SelfTrainingSpec(RF, threshold=1.01)
        with pytest.raises(ValueError, match="k_best"):
            SelfTrainingSpec(RF, criterion="k_best", k_best=0)
        with pytest.raises(ValueError, match="max_iter"):
            SelfTrainingSpec(RF, max_iter=0)

    def test_keys_distinguish(self):
        a = SelfTrainingSpec(RF, "threshold", threshold=0.9)
        b = SelfTrainingSpec(RF, "k_best", k_best=3)
        c = SelfTrainingSpec(SVM, "threshold", threshold=0.9)
        assert len({a.key(), b.key(), c.key()}) == 3


class TestSelection:
    def test_threshold_takes_all_confident(self):
        proba = np.array([[0.95, 0.05], [0.4, 0.6], [0.1, 0.9], [0.5, 0.5]])
        spec = SelfTrainingSpec(RF, "threshold", threshold=0.9)
        np.testing.assert_array_equal(_select(proba, spec), [0, 2])

    def test_threshold_boundary_inclusive(self):
        proba = np.array([[0.9, 0.1]])
        spec = SelfTrainingSpec(RF, "threshold", threshold=0.9)
        np.testing.assert_array_equal(_select(proba, spec), [0])

    def test_k_best_takes_top_k(self):
        proba = np.array([[0.95, 0.05], [0.4, 0.6], [0.1, 0.9], [0.2, 0.8]])
        spec = SelfTrainingSpec(RF, "k_best", k_best=2)
        np.testing.assert_array_equal(_select(proba, spec), [0, 2])

    def test_k_best_requires_better_than_coin_flip(self):
        proba = np.array([[0.5, 0.5], [0.5, 0.5], [0.3, 0.7]])
        spec = SelfTrainingSpec(RF, "k_best", k_best=3)
        np.testing.assert_array_equal(_select(proba, spec), [2])

    def test_k_best_tie_prefers_low_index(self):
        proba = np.array([[0.8, 0.2], [0.2, 0.8], [0.8, 0.2]])
        spec = SelfTrainingSpec(RF, "k_best", k_best=2)
        np.testing.assert_array_equal(_select(proba, spec), [0, 1])


class TestSelfTrain:
    def test_empty_pool_reduces_to_supervised(self):
        rng = np.random.default_rng(90)
        lab_x, lab_y, _, _ = blob_pools(rng, n_lab_per=10)
        spec = SelfTrainingSpec(RF, "threshold", threshold=0.9)
        model, audit = self_train(spec, lab_x, lab_y, np.zeros((0, 2)))
        assert audit == []
        assert model_digest(model) == model_digest(train(RF, lab_x, lab_y))

    def test_unreachable_threshold_is_a_noop(self):
        rng = np.random.default_rng(91)
        lab_x, lab_y, unlab, _ = blob_pools(rng, n_lab_per=5, gap=2.0)
        spec = SelfTrainingSpec(SVM, "threshold", threshold=1.0)
        baseline = train(SVM, lab_x, lab_y)
        assert baseline.predict_proba(unlab).max() < 1.0  # fixture sanity
        model, audit = self_train(spec, lab_x, lab_y, unlab)
        assert audit == []
        assert model_digest(model) == model_digest(baseline)

    def test_blob_oracle_beats_tiny_supervised_baseline(self):
        rng = np.random.default_rng(92)
        lab_x, lab_y, unlab, _ = blob_pools(rng, n_lab_per=2, n_unlab=50)
        test_x = np.vstack([rng.normal(size=(50, 2)) - 4.0,
                            rng.normal(size=(50, 2)) + 4.0])
        test_y = np.array([0] * 50 + [1] * 50)
        spec = SelfTrainingSpec(RF, "threshold", threshold=0.9, max_iter=10)
        model, audit = self_train(spec, lab_x, lab_y, unlab)
        assert len(audit) >= 40  # most of the pool gets promoted
        acc_ssl = (model.predict(test_x) == test_y).mean()
        acc_sup = (train(RF, lab_x, lab_y).predict(test_x) == test_y).mean()
        assert acc_ssl >= acc_sup

    def test_promotions_unique_and_iterations_bounded(self):
        rng = np.random.default_rng(93)
        lab_x, lab_y, unlab, _ = blob_pools(rng, n_lab_per=3, gap=3.0)
        spec = SelfTrainingSpec(RF, "k_best", k_best=5, max_iter=4)
        _, audit = self_train(spec, lab_x, lab_y, unlab)
        ids = [r.pair_id for r in audit]
        assert len(ids) == len(set(ids))
        assert all(1 <= r.iteration <= 4 for r in audit)
        per_round = {}
        for r in audit:
            per_round[r.iteration] = per_round.get(r.iteration, 0) + 1
        assert all(count <= 5 for count in per_round.values())

    def test_k_best_promotes_k_per_round(self):
        rng = np.random.default_rng(94)
        lab_x, lab_y, unlab, _ = blob_pools(rng, n_lab_per=5, n_unlab=20)
        spec = SelfTrainingSpec(RF, "k_best", k_best=3, max_iter=2)
        _, audit = self_train(spec, lab_x, lab_y, unlab)
        assert len(audit) == 6
        assert [r.iteration for r in audit] == [1, 1, 1, 2, 2, 2]

    def test_pool_exhaustion_stops_early(self):
        rng = np.random.default_rng(95)
        lab_x, lab_y, unlab, _ = blob_pools(rng, n_lab_per=5, n_unlab=6)
        spec = SelfTrainingSpec(RF, "threshold", threshold=0.5, max_iter=50)
        _, audit = self_train(spec, lab_x, lab_y, unlab)
        assert len(audit) == 6
        assert max(r.iteration for r in audit) < 50

    def test_custom_ids_flow_into_audit(self):
        rng = np.random.default_rng(96)
        lab_x, lab_y, unlab, _ = blob_pools(rng, n_lab_per=5, n_unlab=4)
        ids = [f"p{i}|q{i}" for i in range(4)]
        spec = SelfTrainingSpec(RF, "threshold", threshold=0.6)
        _, audit = self_train(spec, lab_x, lab_y, unlab, ids)
        assert {r.pair_id for r in audit} <= set(ids)

    def test_pseudo_labels_match_blob_truth(self):
        rng = np.random.default_rng(97)
        lab_x, lab_y, unlab, truth = blob_pools(rng, n_lab_per=4, gap=10.0)
        spec = SelfTrainingSpec(RF, "threshold", threshold=0.9)
        _, audit = self_train(spec, lab_x, lab_y, unlab,
                              [str(i) for i in range(len(unlab))])
        for r in audit:
            assert int(r.pseudo_label) == truth[int(r.pair_id)]
        assert all(r.confidence >= 0.9 for r in audit)

    def test_degenerate_labels_error(self):
        spec = SelfTrainingSpec(RF)
        with pytest.raises(ValueError, match="single class"):
            self_train(spec, np.zeros((3, 2)), np.zeros(3), np.zeros((0, 2)))

    def test_nan_in_pool_rejected(self):
        rng = np.random.default_rng(98)
        lab_x, lab_y, unlab, _ = blob_pools(rng)
        unlab[0, 0] = np.nan
        with pytest.raises(ValueError, match="NaN"):
            self_train(SelfTrainingSpec(RF), lab_x, lab_y, unlab)

    def test_determinism(self):
        rng = np.random.default_rng(99)
        lab_x, lab_y, unlab, _ = blob_pools(rng, n_lab_per=3, gap=3.0)
        spec = SelfTrainingSpec(RF, "k_best", k_best=4, max_iter=3)
        m1, a1 = self_train(spec, lab_x, lab_y, unlab)
        m2, a2 = self_train(spec, lab_x, lab_y, unlab)
        assert a1 == a2
        assert model_digest(m1) == model_digest(m2)


class TestAuditCsv:
    def test_round_trip(self, tmp_path):
        records = [
            PromotionRecord(1, "a|b", Label.VARIANT, 0.9375),
            PromotionRecord(2, "c|d", Label.SIMILAR, 0.8125),
        ]
        path = tmp_path / "audit.csv"
        write_audit_csv(records, path)
        assert path.read_text().splitlines()[0] == \
            "iteration,pair_id,pseudo_label,confidence"
        assert read_audit_csv(path) == records

    def test_empty_trail(self, tmp_path):
        path = tmp_path / "audit.csv"
        write_audit_csv([], path)
        assert read_audit_csv(path) == []

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "audit.csv"
        path.write_text("a,b,c\n")
        with pytest.raises(ValueError, match="header"):
            read_audit_csv(path)
