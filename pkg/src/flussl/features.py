"""Per-strain embedding stores and symmetric pair features.

Embedding files come in two encodings sharing one schema: a text CSV
with a ``#model=<name>,dim=<D>,count=<N>`` header, and a binary layout
(magic ``EMB1``, length-prefixed UTF-8 strings, little-endian u32
integers, 32-bit float vectors). Vectors are held as float64 in memory;
the binary encoding stores 32-bit floats.

A pair of strain vectors becomes one feature row via a symmetric
combination: elementwise absolute difference concatenated with the
elementwise mean (the mean block can be dropped for ablation).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import Label, PairExample

KNOWN_DIMS = {"esm2": 640, "protbert": 1024, "prott5": 1024, "protvec": 100}

BINARY_MAGIC = b"EMB1"

COMBINE_MODES = ("absdiff-mean", "absdiff")


class EmbeddingError(ValueError):
    """Raised for malformed embedding files or inconsistent stores."""


@dataclass
class EmbeddingStore:
    """Immutable strain_id -> vector map tagged with its source model."""

    model_name: str
    dim: int
    vectors: dict[str, np.ndarray]

    def __post_init__(self) -> None:
        if not self.model_name:
            raise EmbeddingError("empty model name")
        if self.dim <= 0:
            raise EmbeddingError(f"dim must be positive, got {self.dim}")
        known = KNOWN_DIMS.get(self.model_name)
        if known is not None and known != self.dim:
            raise EmbeddingError(
                f"model {self.model_name} declares dim={self.dim}, "
                f"expected {known}")
        for strain_id, vec in self.vectors.items():
            if vec.shape != (self.dim,):
                raise EmbeddingError(
                    f"strain {strain_id}: vector length {vec.shape} "
                    f"does not match dim={self.dim}")

    def __len__(self) -> int:
        return len(self.vectors)

    def get(self, strain_id: str) -> np.ndarray:
        try:
            return self.vectors[strain_id]
        except KeyError:
            raise EmbeddingError(f"no embedding for strain {strain_id!r}") from None


# ---------------------------------------------------------------------------
# File format


def _read_text(path: Path) -> EmbeddingStore:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("#"):
            raise EmbeddingError(f"{path}:1: missing '#model=...' header")
        fields = dict(
            part.split("=", 1) for part in header[1:].split(",") if "=" in part)
        if set(fields) != {"model", "dim", "count"}:
            raise EmbeddingError(
                f"{path}:1: header must declare model, dim, count; got {header!r}")
        try:
            dim = int(fields["dim"])
            count = int(fields["count"])
        except ValueError:
            raise EmbeddingError(f"{path}:1: non-integer dim/count") from None
        vectors: dict[str, np.ndarray] = {}
        for lineno, raw in enumerate(fh, start=2):
            line = raw.strip()
            if not line:
                continue
            cells = line.split(",")
            strain_id = cells[0]
            if strain_id in vectors:
                raise EmbeddingError(
                    f"{path}:{lineno}: duplicate strain_id {strain_id!r}")
            if len(cells) - 1 != dim:
                raise EmbeddingError(
                    f"{path}:{lineno}: strain {strain_id!r} has "
                    f"{len(cells) - 1} values, expected dim={dim}")
            try:
                vec = np.array([float(c) for c in cells[1:]], dtype=np.float64)
            except ValueError:
                raise EmbeddingError(
                    f"{path}:{lineno}: non-numeric value for {strain_id!r}") from None
            vectors[strain_id] = vec
    if len(vectors) != count:
        raise EmbeddingError(
            f"{path}: header declares count={count}, found {len(vectors)} rows")
    return EmbeddingStore(fields["model"], dim, vectors)


def _read_exact(fh, n: int, path: Path, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise EmbeddingError(f"{path}: truncated file while reading {what}")
    return data


def _read_binary(path: Path) -> EmbeddingStore:
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4, path, "magic")
        if magic != BINARY_MAGIC:
            raise EmbeddingError(f"{path}: bad magic {magic!r}")

        def read_u32(what: str) -> int:
            return struct.unpack("<I", _read_exact(fh, 4, path, what))[0]

        def read_str(what: str) -> str:
            length = read_u32(f"{what} length")
            return _read_exact(fh, length, path, what).decode("utf-8")

        model_name = read_str("model name")
        dim = read_u32("dim")
        count = read_u32("count")
        vectors: dict[str, np.ndarray] = {}
        for i in range(count):
            strain_id = read_str(f"strain_id #{i}")
            if strain_id in vectors:
                raise EmbeddingError(f"{path}: duplicate strain_id {strain_id!r}")
            blob = _read_exact(fh, 4 * dim, path, f"vector for {strain_id!r}")
            vec = np.frombuffer(blob, dtype="<f4").astype(np.float64)
            vectors[strain_id] = vec
        if fh.read(1):
            raise EmbeddingError(f"{path}: trailing bytes after {count} records")
    return EmbeddingStore(model_name, dim, vectors)


def load_embeddings(path: str | Path) -> EmbeddingStore:
    """Load either encoding, sniffing the binary magic."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == BINARY_MAGIC:
        return _read_binary(path)
    return _read_text(path)


def write_embeddings(
    store: EmbeddingStore,
    path: str | Path,
    encoding: str = "text",
) -> None:
    """Write a store in the requested encoding, rows sorted by strain_id.

    Values pass through 32-bit floats in both encodings so a text file
    and a binary file written from the same store load back identically.
    """
    path = Path(path)
    ids = sorted(store.vectors)
    if encoding == "text":
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"#model={store.model_name},dim={store.dim},"
                     f"count={len(ids)}\n")
            for strain_id in ids:
                vec = store.vectors[strain_id].astype(np.float32)
                cells = ",".join(repr(float(v)) for v in vec)
                fh.write(f"{strain_id},{cells}\n")
    elif encoding == "binary":
        with open(path, "wb") as fh:
            fh.write(BINARY_MAGIC)
            name = store.model_name.encode("utf-8")
            fh.write(struct.pack("<I", len(name)) + name)
            fh.write(struct.pack("<II", store.dim, len(ids)))
            for strain_id in ids:
                raw = strain_id.encode("utf-8")
                fh.write(struct.pack("<I", len(raw)) + raw)
                fh.write(store.vectors[strain_id].astype("<f4").tobytes())
    else:
        raise EmbeddingError(f"unknown encoding {encoding!r}")


# ---------------------------------------------------------------------------
# Pair features


def featurize_pair(
    e_a: np.ndarray,
    e_b: np.ndarray,
    combine: str = "absdiff-mean",
) -> np.ndarray:
    """Symmetric pair feature: |e_a - e_b| (+ optional (e_a + e_b)/2)."""
    e_a = np.asarray(e_a, dtype=np.float64)
    e_b = np.asarray(e_b, dtype=np.float64)
    if e_a.shape != e_b.shape or e_a.ndim != 1:
        raise EmbeddingError(
            f"vector shapes {e_a.shape} and {e_b.shape} do not match")
    if combine == "absdiff-mean":
        return np.concatenate([np.abs(e_a - e_b), (e_a + e_b) / 2.0])
    if combine == "absdiff":
        return np.abs(e_a - e_b)
    raise EmbeddingError(f"unknown combine mode {combine!r}")


def featurize_corpus(
    store: EmbeddingStore,
    pairs: Sequence[PairExample],
    combine: str = "absdiff-mean",
) -> tuple[np.ndarray, np.ndarray]:
    """Stack pair features into a matrix with an aligned label vector.

    Row i is featurize_pair of pairs[i]; labels keep the Unlabelled
    marker. Every referenced strain must be present; missing ids are
    reported all at once.
    """
    if combine not in COMBINE_MODES:
        raise EmbeddingError(f"unknown combine mode {combine!r}")
    needed = sorted({s for p in pairs for s in (p.a, p.b)})
    missing = [s for s in needed if s not in store.vectors]
    if missing:
        raise EmbeddingError(f"missing embeddings for strains: {missing}")
    width = store.dim * (2 if combine == "absdiff-mean" else 1)
    x = np.empty((len(pairs), width), dtype=np.float64)
    y = np.empty(len(pairs), dtype=np.int64)
    for i, pair in enumerate(pairs):
        x[i] = featurize_pair(store.vectors[pair.a], store.vectors[pair.b],
                              combine)
        y[i] = int(pair.label)
    return x, y
