"""Tests for embedding file IO and symmetric pair featurization."""

import struct

import numpy as np
import pytest

from flussl.corpus import Label, PairExample
from flussl.features import (
    BINARY_MAGIC,
    EmbeddingError,
    EmbeddingStore,
    featurize_corpus,
    featurize_pair,
    load_embeddings,
    write_embeddings,
)


def random_store(rng, n=6, dim=5, model="toy"):
    vectors = {f"s{i:02d}": rng.normal(size=dim) for i in range(n)}
    return EmbeddingStore(model, dim, vectors)


class TestStore:
    def test_known_model_dim_enforced(self):
        rng = np.random.default_rng(0)
        with pytest.raises(EmbeddingError, match="expected 640"):
            EmbeddingStore("esm2", 100, {"a": rng.normal(size=100)})
        EmbeddingStore("esm2", 640, {"a": rng.normal(size=640)})
        EmbeddingStore("protvec", 100, {"a": rng.normal(size=100)})

    def test_vector_length_enforced(self):
        with pytest.raises(EmbeddingError, match="does not match dim"):
            EmbeddingStore("toy", 4, {"a": np.zeros(3)})

    def test_get_missing_strain(self):
        store = random_store(np.random.default_rng(1))
        with pytest.raises(EmbeddingError, match="no embedding"):
            store.get("nope")


class TestFileFormats:
    def test_text_round_trip(self, tmp_path):
        store = random_store(np.random.default_rng(2))
        path = tmp_path / "e.emb"
        write_embeddings(store, path, "text")
        again = load_embeddings(path)
        assert again.model_name == store.model_name
        assert again.dim == store.dim
        for sid, vec in store.vectors.items():
            np.testing.assert_array_equal(
                again.vectors[sid], vec.astype(np.float32).astype(np.float64))

    def test_binary_round_trip(self, tmp_path):
        store = random_store(np.random.default_rng(3), n=9, dim=7)
        path = tmp_path / "e.bin"
        write_embeddings(store, path, "binary")
        again = load_embeddings(path)
        assert again.model_name == store.model_name
        assert again.dim == store.dim
        for sid, vec in store.vectors.items():
            np.testing.assert_array_equal(
                again.vectors[sid], vec.astype(np.float32).astype(np.float64))

    def test_text_and_binary_load_identically(self, tmp_path):
        store = random_store(np.random.default_rng(4), n=5, dim=11)
        t, b = tmp_path / "e.emb", tmp_path / "e.bin"
        write_embeddings(store, t, "text")
        write_embeddings(store, b, "binary")
        st, sb = load_embeddings(t), load_embeddings(b)
        assert set(st.vectors) == set(sb.vectors)
        for sid in st.vectors:
            np.testing.assert_array_equal(st.vectors[sid], sb.vectors[sid])

    def test_binary_layout_is_as_documented(self, tmp_path):
        vec = np.array([1.5, -2.0], dtype=np.float64)
        store = EmbeddingStore("toy", 2, {"ab": vec})
        path = tmp_path / "e.bin"
        write_embeddings(store, path, "binary")
        blob = path.read_bytes()
        expect = (BINARY_MAGIC
                  + struct.pack("<I", 3) + b"toy"
                  + struct.pack("<II", 2, 1)
                  + struct.pack("<I", 2) + b"ab"
                  + struct.pack("<ff", 1.5, -2.0))
        assert blob == expect

    def test_text_header_checked(self, tmp_path):
        path = tmp_path / "e.emb"
        path.write_text("s0,1.0,2.0\n")
        with pytest.raises(EmbeddingError, match="header"):
            load_embeddings(path)

    def test_text_count_mismatch(self, tmp_path):
        path = tmp_path / "e.emb"
        path.write_text("#model=toy,dim=2,count=2\ns0,1.0,2.0\n")
        with pytest.raises(EmbeddingError, match="count=2"):
            load_embeddings(path)

    def test_text_row_dimension_mismatch_names_strain(self, tmp_path):
        path = tmp_path / "e.emb"
        path.write_text("#model=toy,dim=3,count=1\nbad_row,1.0,2.0\n")
        with pytest.raises(EmbeddingError, match="bad_row"):
            load_embeddings(path)

    def test_duplicate_strain_rejected_both_encodings(self, tmp_path):
        path = tmp_path / "e.emb"
        path.write_text("#model=toy,dim=1,count=2\ns0,1.0\ns0,2.0\n")
        with pytest.raises(EmbeddingError, match="duplicate"):
            load_embeddings(path)
        bin_path = tmp_path / "e.bin"
        rec = struct.pack("<I", 2) + b"s0" + struct.pack("<f", 1.0)
        bin_path.write_bytes(BINARY_MAGIC + struct.pack("<I", 3) + b"toy"
                             + struct.pack("<II", 1, 2) + rec + rec)
        with pytest.raises(EmbeddingError, match="duplicate"):
            load_embeddings(bin_path)

    def test_binary_truncation_detected(self, tmp_path):
        store = random_store(np.random.default_rng(5), n=3, dim=4)
        path = tmp_path / "e.bin"
        write_embeddings(store, path, "binary")
        blob = path.read_bytes()
        (tmp_path / "cut.bin").write_bytes(blob[:-3])
        with pytest.raises(EmbeddingError, match="truncated"):
            load_embeddings(tmp_path / "cut.bin")

    def test_binary_trailing_bytes_detected(self, tmp_path):
        store = random_store(np.random.default_rng(6), n=2, dim=4)
        path = tmp_path / "e.bin"
        write_embeddings(store, path, "binary")
        (tmp_path / "fat.bin").write_bytes(path.read_bytes() + b"x")
        with pytest.raises(EmbeddingError, match="trailing"):
            load_embeddings(tmp_path / "fat.bin")


class TestFeaturizePair:
    def test_identical_vectors_zero_difference(self):
        v = np.array([0.5, -1.0, 2.0])
        out = featurize_pair(v, v)
        np.testing.assert_array_equal(out[:3], 0.0)
        np.testing.assert_array_equal(out[3:], v)

    def test_worked_example(self):
        out = featurize_pair(np.array([1.0, 0.0]), np.array([0.0, 1.0]))
        np.testing.assert_array_equal(out, [1.0, 1.0, 0.5, 0.5])

    def test_symmetry_exact(self):
        rng = np.random.default_rng(8)
        for _ in range(1000):
            u = rng.normal(size=6)
            v = rng.normal(size=6)
            np.testing.assert_array_equal(featurize_pair(u, v),
                                          featurize_pair(v, u))

    def test_absdiff_only_mode(self):
        u, v = np.array([3.0, 1.0]), np.array([1.0, 2.0])
        np.testing.assert_array_equal(featurize_pair(u, v, "absdiff"),
                                      [2.0, 1.0])

    def test_length_mismatch(self):
        with pytest.raises(EmbeddingError):
            featurize_pair(np.zeros(3), np.zeros(4))

    def test_unknown_mode(self):
        with pytest.raises(EmbeddingError):
            featurize_pair(np.zeros(2), np.zeros(2), "concat")


class TestFeaturizeCorpus:
    def make_pairs(self, store, labels):
        ids = sorted(store.vectors)
        pairs = []
        for i, label in enumerate(labels):
            a, b = ids[i], ids[i + 1]
            d = None if label == Label.UNLABELLED else 2.0
            pairs.append(PairExample(a, b, "H1N1", d, label))
        return pairs

    def test_shapes_and_labels(self):
        store = random_store(np.random.default_rng(9), n=5, dim=4)
        pairs = self.make_pairs(
            store, [Label.SIMILAR, Label.VARIANT, Label.UNLABELLED])
        x, y = featurize_corpus(store, pairs)
        assert x.shape == (3, 8)
        np.testing.assert_array_equal(y, [0, 1, -1])

    def test_rows_match_pair_featurizer(self):
        store = random_store(np.random.default_rng(10), n=5, dim=3)
        pairs = self.make_pairs(store, [Label.SIMILAR, Label.VARIANT])
        x, _ = featurize_corpus(store, pairs)
        for row, pair in zip(x, pairs):
            np.testing.assert_array_equal(
                row, featurize_pair(store.vectors[pair.a],
                                    store.vectors[pair.b]))

    def test_empty_pair_list(self):
        store = random_store(np.random.default_rng(11), dim=4)
        x, y = featurize_corpus(store, [])
        assert x.shape == (0, 8)
        assert y.shape == (0,)

    def test_missing_strains_listed_together(self):
        store = random_store(np.random.default_rng(12), n=2, dim=3)
        pairs = [PairExample("zz1", "zz2", "H1N1", None, Label.UNLABELLED)]
        with pytest.raises(EmbeddingError, match=r"zz1.*zz2"):
            featurize_corpus(store, pairs)

    def test_deterministic_across_calls(self):
        store = random_store(np.random.default_rng(13), n=6, dim=5)
        pairs = self.make_pairs(store, [Label.SIMILAR] * 4)
        x1, y1 = featurize_corpus(store, pairs)
        x2, y2 = featurize_corpus(store, pairs)
        np.testing.assert_array_equal(x1, x2)
        np.testing.assert_array_equal(y1, y2)

    def test_absdiff_mode_width(self):
        store = random_store(np.random.default_rng(14), n=4, dim=6)
        pairs = self.make_pairs(store, [Label.VARIANT])
        x, _ = featurize_corpus(store, pairs, "absdiff")
        assert x.shape == (1, 6)
