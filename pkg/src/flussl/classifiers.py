"""Common train/predict contract over the two base learners.

A ClassifierSpec names the learner kind with its hyperparameters and an
explicit seed; train() returns a TrainedModel wrapping the fitted
forest or SVM behind one predict/predict_proba surface. Models
serialize to a self-describing binary blob (magic, format-version byte,
kind byte) whose round trip preserves predictions bit for bit.
"""

from __future__ import annotations

import dataclasses
import hashlib
import io
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .forest import RandomForest, Tree
from .svm import SVM

MODEL_MAGIC = b"FLSM"
MODEL_VERSION = 1
_KIND_CODES = {"rf": 0, "svm": 1}
_KIND_NAMES = {v: k for k, v in _KIND_CODES.items()}


class ModelFormatError(ValueError):
    """Raised for unreadable or corrupt model blobs."""


@dataclass(frozen=True)
class ClassifierSpec:
    """Learner kind, its hyperparameters, and an explicit seed.

    Forest fields (n_estimators, max_depth) apply when kind == "rf";
    margin fields (c, gamma) when kind == "svm". max_depth None means
    grow until pure or down to 2-sample nodes.
    """

    kind: str
    n_estimators: int = 100
    max_depth: int | None = None
    c: float = 1.0
    gamma: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in _KIND_CODES:
            raise ValueError(f"kind must be rf or svm, got {self.kind!r}")
        if self.kind == "rf":
            if self.n_estimators < 1:
                raise ValueError(f"n_estimators must be >= 1, got {self.n_estimators}")
            if self.max_depth is not None and self.max_depth < 1:
                raise ValueError(f"max_depth must be >= 1 or None, got {self.max_depth}")
        else:
            if self.c <= 0:
                raise ValueError(f"c must be positive, got {self.c}")
            if self.gamma <= 0:
                raise ValueError(f"gamma must be positive, got {self.gamma}")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError(f"seed must fit an unsigned 64-bit int, got {self.seed}")

    def key(self) -> str:
        """Hyperparameter identity, seed excluded; stable across runs."""
        if self.kind == "rf":
            return f"rf:n_estimators={self.n_estimators},max_depth={self.max_depth}"
        return f"svm:c={self.c!r},gamma={self.gamma!r}"

    def with_seed(self, seed: int) -> "ClassifierSpec":
        return dataclasses.replace(self, seed=seed)


@dataclass
class TrainedModel:
    """Fitted learner; classes are (0 Similar, 1 Variant), ties predict 1."""

    spec: ClassifierSpec
    impl: RandomForest | SVM
    classes: tuple[int, int] = (0, 1)

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return self.impl.predict_proba(x)

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.impl.predict(x)


def train(spec: ClassifierSpec, x: np.ndarray, y: np.ndarray) -> TrainedModel:
    """Fit the learner named by the spec; deterministic in (spec, x, y)."""
    if spec.kind == "rf":
        impl = RandomForest(spec.n_estimators, spec.max_depth, spec.seed)
    else:
        impl = SVM(spec.c, spec.gamma, spec.seed)
    impl.fit(x, y)
    return TrainedModel(spec, impl)


# ---------------------------------------------------------------------------
# Serialization


def _pack_array(buf: io.BytesIO, arr: np.ndarray, dtype: str) -> None:
    data = np.ascontiguousarray(arr, dtype=dtype).tobytes()
    buf.write(struct.pack("<I", len(data)))
    buf.write(data)


def _unpack_array(buf: io.BytesIO, dtype: str) -> np.ndarray:
    (length,) = struct.unpack("<I", _take(buf, 4))
    return np.frombuffer(_take(buf, length), dtype=dtype).copy()


def _take(buf: io.BytesIO, n: int) -> bytes:
    data = buf.read(n)
    if len(data) != n:
        raise ModelFormatError("truncated model blob")
    return data


def serialize_model(model: TrainedModel) -> bytes:
    buf = io.BytesIO()
    spec = model.spec
    buf.write(MODEL_MAGIC)
    buf.write(bytes([MODEL_VERSION, _KIND_CODES[spec.kind]]))
    buf.write(struct.pack("<Q", spec.seed))
    impl = model.impl
    if spec.kind == "rf":
        depth = 0 if spec.max_depth is None else spec.max_depth
        buf.write(struct.pack("<III", spec.n_estimators, depth,
                              impl.n_features_))
        for tree in impl.trees:
            buf.write(struct.pack("<I", len(tree.feature)))
            _pack_array(buf, tree.feature, "<i4")
            _pack_array(buf, tree.threshold, "<f8")
            _pack_array(buf, tree.left, "<i4")
            _pack_array(buf, tree.right, "<i4")
            _pack_array(buf, tree.vote, "i1")
    else:
        buf.write(struct.pack("<ddd", spec.c, spec.gamma, impl.tol))
        buf.write(struct.pack("<I", impl.n_features_))
        buf.write(struct.pack("<ddd", impl.bias, impl.platt_a, impl.platt_b))
        buf.write(bytes([1 if impl.converged_ else 0]))
        _pack_array(buf, impl.sv_coef, "<f8")
        _pack_array(buf, impl.sv_x.ravel(), "<f8")
    return buf.getvalue()


def deserialize_model(blob: bytes) -> TrainedModel:
    buf = io.BytesIO(blob)
    if _take(buf, 4) != MODEL_MAGIC:
        raise ModelFormatError("bad magic; not a model blob")
    version, kind_code = _take(buf, 2)
    if version != MODEL_VERSION:
        raise ModelFormatError(f"unsupported format version {version}")
    if kind_code not in _KIND_NAMES:
        raise ModelFormatError(f"unknown learner code {kind_code}")
    kind = _KIND_NAMES[kind_code]
    (seed,) = struct.unpack("<Q", _take(buf, 8))
    if kind == "rf":
        n_estimators, depth, n_features = struct.unpack("<III", _take(buf, 12))
        spec = ClassifierSpec("rf", n_estimators=n_estimators,
                              max_depth=depth or None, seed=seed)
        impl = RandomForest(n_estimators, depth or None, seed)
        for _ in range(n_estimators):
            (n_nodes,) = struct.unpack("<I", _take(buf, 4))
            feature = _unpack_array(buf, "<i4")
            threshold = _unpack_array(buf, "<f8")
            left = _unpack_array(buf, "<i4")
            right = _unpack_array(buf, "<i4")
            vote = _unpack_array(buf, "i1")
            if len(feature) != n_nodes:
                raise ModelFormatError("tree node count mismatch")
            impl.trees.append(Tree(feature, threshold, left, right, vote))
        impl.n_features_ = n_features
    else:
        c, gamma, tol = struct.unpack("<ddd", _take(buf, 24))
        (n_features,) = struct.unpack("<I", _take(buf, 4))
        bias, platt_a, platt_b = struct.unpack("<ddd", _take(buf, 24))
        converged = _take(buf, 1)[0] == 1
        sv_coef = _unpack_array(buf, "<f8")
        sv_flat = _unpack_array(buf, "<f8")
        spec = ClassifierSpec("svm", c=c, gamma=gamma, seed=seed)
        impl = SVM(c, gamma, seed, tol)
        impl.sv_coef = sv_coef
        impl.sv_x = sv_flat.reshape(len(sv_coef), n_features)
        impl.bias = bias
        impl.platt_a = platt_a
        impl.platt_b = platt_b
        impl.converged_ = converged
        impl.n_features_ = n_features
    if buf.read(1):
        raise ModelFormatError("trailing bytes after model payload")
    return TrainedModel(spec, impl)


def save_model(model: TrainedModel, path: str | Path) -> None:
    Path(path).write_bytes(serialize_model(model))


def load_model(path: str | Path) -> TrainedModel:
    return deserialize_model(Path(path).read_bytes())


def model_digest(model: TrainedModel) -> str:
    """sha256 of the serialized blob; equal digests mean equal models."""
    return hashlib.sha256(serialize_model(model)).hexdigest()
