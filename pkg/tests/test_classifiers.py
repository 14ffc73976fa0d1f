"""Tests for the shared learner contract and model serialization."""

import numpy as np
import pytest

from flussl.classifiers import (
    ClassifierSpec,
    ModelFormatError,
    deserialize_model,
    load_model,
    model_digest,
    save_model,
    serialize_model,
    train,
)


def blobs(rng, n_per=15, gap=4.0):
    x = np.vstack([rng.normal(size=(n_per, 3)) - gap / 2,
                   rng.normal(size=(n_per, 3)) + gap / 2])
    y = np.array([0] * n_per + [1] * n_per)
    return x, y


RF_SPEC = ClassifierSpec("rf", n_estimators=15, max_depth=4, seed=5)
SVM_SPEC = ClassifierSpec("svm", c=2.0, gamma=0.5, seed=5)


class TestSpec:
    def test_validation(self):
        with pytest.raises(ValueError, match="kind"):
            ClassifierSpec("boost")
        with pytest.raises(ValueError, match="n_estimators"):
            ClassifierSpec("rf", n_estimators=0)
        with pytest.raises(ValueError, match="max_depth"):
            ClassifierSpec("rf", max_depth=-2)
        with pytest.raises(ValueError, match="c must"):
            ClassifierSpec("svm", c=0.0)
        with pytest.raises(ValueError, match="gamma"):
            ClassifierSpec("svm", gamma=0.0)
        with pytest.raises(ValueError, match="seed"):
            ClassifierSpec("rf", seed=-1)

    def test_key_excludes_seed(self):
        a = ClassifierSpec("rf", n_estimators=50, max_depth=None, seed=1)
        b = a.with_seed(999)
        assert a.key() == b.key()
        assert "50" in a.key()

    def test_keys_distinguish_hyperparameters(self):
        specs = [ClassifierSpec("rf", n_estimators=n, max_depth=d)
                 for n in (10, 50) for d in (5, None)]
        specs += [ClassifierSpec("svm", c=c, gamma=g)
                  for c in (0.1, 1.0) for g in (0.01, 1.0)]
        keys = {s.key() for s in specs}
        assert len(keys) == len(specs)


class TestTrain:
    @pytest.mark.parametrize("spec", [RF_SPEC, SVM_SPEC], ids=["rf", "svm"])
    def test_contract(self, spec):
        rng = np.random.default_rng(80)
        x, y = blobs(rng)
        model = train(spec, x, y)
        assert model.classes == (0, 1)
        proba = model.predict_proba(x)
        assert proba.shape == (len(x), 2)
        np.testing.assert_allclose(proba.sum(axis=1), 1.0, atol=1e-9)
        pred = model.predict(x)
        assert set(np.unique(pred)) <= {0, 1}
        assert (pred == y).mean() == 1.0  # well separated

    @pytest.mark.parametrize("spec", [RF_SPEC, SVM_SPEC], ids=["rf", "svm"])
    def test_deterministic_digests(self, spec):
        rng = np.random.default_rng(81)
        x, y = blobs(rng, gap=1.5)
        d1 = model_digest(train(spec, x, y))
        d2 = model_digest(train(spec, x, y))
        assert d1 == d2

    def test_seed_changes_rf_digest(self):
        rng = np.random.default_rng(82)
        x, y = blobs(rng, gap=1.0)
        d1 = model_digest(train(RF_SPEC, x, y))
        d2 = model_digest(train(RF_SPEC.with_seed(6), x, y))
        assert d1 != d2


class TestSerialization:
    @pytest.mark.parametrize("spec", [
        RF_SPEC,
        ClassifierSpec("rf", n_estimators=8, max_depth=None, seed=2),
        SVM_SPEC,
    ], ids=["rf-capped", "rf-unbounded", "svm"])
    def test_round_trip_predictions_bit_identical(self, spec, tmp_path):
        rng = np.random.default_rng(83)
        x, y = blobs(rng, gap=2.0)
        x_test = rng.normal(size=(50, 3))
        model = train(spec, x, y)
        path = tmp_path / "model.bin"
        save_model(model, path)
        loaded = load_model(path)
        assert loaded.spec == model.spec
        np.testing.assert_array_equal(loaded.predict_proba(x_test),
                                      model.predict_proba(x_test))
        np.testing.assert_array_equal(loaded.predict(x_test),
                                      model.predict(x_test))

    def test_blob_is_self_describing(self):
        rng = np.random.default_rng(84)
        x, y = blobs(rng)
        blob = serialize_model(train(RF_SPEC, x, y))
        assert blob[:4] == b"FLSM"
        assert blob[4] == 1  # format version byte

    def test_reserialization_is_stable(self, tmp_path):
        rng = np.random.default_rng(85)
        x, y = blobs(rng)
        model = train(SVM_SPEC, x, y)
        blob1 = serialize_model(model)
        blob2 = serialize_model(deserialize_model(blob1))
        assert blob1 == blob2

    def test_corrupt_blobs_rejected(self):
        rng = np.random.default_rng(86)
        x, y = blobs(rng, n_per=6)
        blob = serialize_model(train(RF_SPEC, x, y))
        with pytest.raises(ModelFormatError, match="magic"):
            deserialize_model(b"XXXX" + blob[4:])
        with pytest.raises(ModelFormatError, match="version"):
            deserialize_model(blob[:4] + bytes([9]) + blob[5:])
        with pytest.raises(ModelFormatError, match="truncated"):
            deserialize_model(blob[:-5])
        with pytest.raises(ModelFormatError, match="trailing"):
            deserialize_model(blob + b"\x00")
