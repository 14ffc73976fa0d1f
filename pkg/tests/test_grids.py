"""Tests for hyperparameter grids and the inner-loop search."""

import numpy as np
import pytest

from flussl.classifiers import ClassifierSpec
from flussl.grids import (
    GridSearchError,
    grid_search,
    label_spreading_grid,
    model_size,
    rf_grid,
    self_training_grid,
    svm_grid,
)
from flussl.labelspread import LabelSpreadingSpec
from flussl.selftraining import SelfTrainingSpec


class TestGridContents:
    def test_rf_grid_size_and_values(self):
        grid = rf_grid()
        assert len(grid) == 25
        assert {s.n_estimators for s in grid} == {10, 50, 100, 150, 200}
        assert {s.max_depth for s in grid} == {5, 10, 15, 20, None}

    def test_svm_grid_log_spacing(self):
        grid = svm_grid()
        assert len(grid) == 64
        values = sorted({s.c for s in grid})
        np.testing.assert_allclose(values, 10.0 ** np.arange(-6, 2))
        assert sorted({s.gamma for s in grid}) == values

    def test_self_training_grid_axes(self):
        base = [ClassifierSpec("rf", n_estimators=10)]
        grid = self_training_grid(base)
        # 11 thresholds x 4 max_iter + 4 k_best x 4 max_iter
        assert len(grid) == 11 * 4 + 4 * 4
        thresholds = {s.threshold for s in grid if s.criterion == "threshold"}
        assert len(thresholds) == 11
        assert 0.99 in thresholds and 0.50 in thresholds
        ks = {s.k_best for s in grid if s.criterion == "k_best"}
        assert ks == {3, 5, 10, 15}

    def test_self_training_grid_crosses_base(self):
        grid = self_training_grid(rf_grid(), thresholds=(0.9,),
                                  criteria=("threshold",), max_iters=(5,))
        assert len(grid) == 25
        assert len({s.key() for s in grid}) == 25

    def test_label_spreading_grid(self):
        grid = label_spreading_grid()
        assert len(grid) == 3 * 10 * 7
        assert {s.alpha for s in grid} == {0.1, 0.2, 0.3}
        assert {s.n_neighbors for s in grid} == {3, 5, 7, 11, 20, 30, 40,
                                                 50, 75, 100}
        assert {s.max_iter for s in grid} == {20, 25, 30, 35, 40, 45, 50}

    def test_grids_have_unique_keys(self):
        for grid in (rf_grid(), svm_grid(), label_spreading_grid()):
            keys = [s.key() for s in grid]
            assert len(keys) == len(set(keys))


class TestModelSize:
    def test_size_rules(self):
        assert model_size(ClassifierSpec("rf", n_estimators=50)) == 50
        assert model_size(ClassifierSpec("svm", c=0.1)) == 0.1
        assert model_size(SelfTrainingSpec(
            ClassifierSpec("rf", n_estimators=10))) == 10
        assert model_size(LabelSpreadingSpec(n_neighbors=7)) == 7
        with pytest.raises(TypeError):
            model_size("not a spec")


class TestGridSearch:
    def test_single_point_grid(self):
        spec = ClassifierSpec("rf", n_estimators=10)
        result = grid_search([spec], lambda s: [0.5, 0.6])
        assert result.best is spec
        assert result.best_mean == pytest.approx(0.55)

    def test_dominant_config_wins(self):
        grid = [ClassifierSpec("rf", n_estimators=n) for n in (10, 50)]
        scores = {10: [0.4, 0.4], 50: [0.9, 0.9]}
        result = grid_search(grid, lambda s: scores[s.n_estimators])
        assert result.best.n_estimators == 50

    def test_tie_prefers_smaller_model(self):
        grid = [ClassifierSpec("rf", n_estimators=n) for n in (200, 10, 50)]
        result = grid_search(grid, lambda s: [0.7])
        assert result.best.n_estimators == 10

    def test_tie_prefers_smaller_c(self):
        grid = svm_grid(cs=[10.0, 0.001], gammas=[1.0])
        result = grid_search(grid, lambda s: [0.7])
        assert result.best.c == 0.001

    def test_full_tie_falls_back_to_grid_order(self):
        grid = [ClassifierSpec("svm", c=1.0, gamma=g) for g in (0.9, 0.1)]
        result = grid_search(grid, lambda s: [0.7])
        assert result.best.gamma == 0.9  # same mean, same size: first wins

    def test_failures_recorded_not_fatal(self):
        grid = [ClassifierSpec("rf", n_estimators=n) for n in (10, 50)]

        def evaluate(s):
            if s.n_estimators == 10:
                raise ValueError("degenerate fold")
            return [0.8]

        result = grid_search(grid, evaluate)
        assert result.best.n_estimators == 50
        assert list(result.failures) == ["rf:n_estimators=10,max_depth=None"]
        assert "degenerate" in result.failures[
            "rf:n_estimators=10,max_depth=None"]

    def test_all_failures_raise_with_diagnostics(self):
        grid = [ClassifierSpec("rf", n_estimators=10)]

        def evaluate(s):
            raise ValueError("no data")

        with pytest.raises(GridSearchError, match="no data"):
            grid_search(grid, evaluate)

    def test_empty_grid_rejected(self):
        with pytest.raises(GridSearchError, match="empty"):
            grid_search([], lambda s: [1.0])

    def test_means_recorded_per_config(self):
        grid = [ClassifierSpec("rf", n_estimators=n) for n in (10, 50)]
        result = grid_search(grid, lambda s: [s.n_estimators / 100])
        assert result.means["rf:n_estimators=10,max_depth=None"] == 0.1
        assert result.means["rf:n_estimators=50,max_depth=None"] == 0.5
