"""Deterministic per-strain embedding models.

Pretrained network weights are not bundled, so every model runs in a
documented offline mode: token and k-mer tables are drawn once from a
seeded generator keyed by (model, seed), making extraction fully
deterministic. Identical sequences always map to identical vectors.

Transformer-family models (esm2, protbert, prott5) embed each residue
token, modulate it by a position-dependent factor, and mean-pool over
residue positions only; the sequence is wrapped in start/end marker
tokens whose states are explicitly excluded from the pool. The protvec
model averages the vectors of the sequence's overlapping 3-mers, of
which a length-L sequence has L-2.

Residues outside the 20 standard amino acids plus ``X`` map to the
unknown token ``X``; callers receive a note for each affected strain.
``batch_size`` and ``device`` are accepted for interface compatibility
and do not change offline results. ``precision = "float16"`` rounds
each pooled vector through 16-bit floats, mirroring half-precision
encoder output.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

AMINO_ACIDS = "ACDEFGHIKLMNPQRSTVWY"
UNKNOWN_TOKEN = "X"
VOCAB = AMINO_ACIDS + UNKNOWN_TOKEN

MODEL_DIMS = {"esm2": 640, "protbert": 1024, "prott5": 1024, "protvec": 100}

MODEL_ALIASES = {
    "esm2": "esm2",
    "esm2_t30_150m": "esm2",
    "protbert": "protbert",
    "prott5": "prott5",
    "prott5_xl_u50": "prott5",
    "protvec": "protvec",
}

PRECISIONS = ("float32", "float16")

_TOKEN_INDEX = {c: i for i, c in enumerate(VOCAB)}
_START, _END = len(VOCAB), len(VOCAB) + 1


class ExtractorError(ValueError):
    """Raised for inputs the extractor cannot embed."""


def canonical_model(name: str) -> str:
    """Resolve a model name or alias to its canonical short name."""
    try:
        return MODEL_ALIASES[name.lower()]
    except KeyError:
        known = ", ".join(sorted(set(MODEL_ALIASES)))
        raise ExtractorError(f"unknown model {name!r} (known: {known})") \
            from None


@dataclass(frozen=True)
class ExtractorSpec:
    """Extraction settings; model aliases are canonicalized on creation."""

    model: str
    seed: int = 0
    batch_size: int = 8
    device: str = "cpu"
    precision: str = "float32"

    def __post_init__(self) -> None:
        object.__setattr__(self, "model", canonical_model(self.model))
        if self.batch_size <= 0:
            raise ExtractorError(f"batch_size must be positive, "
                                 f"got {self.batch_size}")
        if self.precision not in PRECISIONS:
            raise ExtractorError(f"precision must be one of {PRECISIONS}, "
                                 f"got {self.precision!r}")

    @property
    def dim(self) -> int:
        return MODEL_DIMS[self.model]


def _rng(spec: ExtractorSpec, table: str) -> np.random.Generator:
    key = f"{spec.model}:{spec.seed}:{table}".encode()
    return np.random.default_rng(
        int.from_bytes(hashlib.sha256(key).digest()[:8], "little"))


def token_table(spec: ExtractorSpec) -> np.ndarray:
    """Token state table: residues, unknown, then start/end markers."""
    rows = len(VOCAB) + 2
    return _rng(spec, "tokens").standard_normal((rows, spec.dim)) \
        / np.sqrt(spec.dim)


def position_frequencies(spec: ExtractorSpec) -> np.ndarray:
    """Per-dimension frequencies for the positional modulation."""
    return _rng(spec, "positions").uniform(0.1, 1.0, spec.dim)


def kmer_table(spec: ExtractorSpec) -> np.ndarray:
    """One vector per 3-mer over the 21-token alphabet."""
    return _rng(spec, "kmers").standard_normal((len(VOCAB) ** 3, spec.dim)) \
        / np.sqrt(spec.dim)


def _tokenize(strain_id: str, seq: str) -> tuple[np.ndarray, str]:
    """Map a sequence to token indices, substituting unknowns.

    Returns the index vector and a note ("" when every residue was
    supported) listing the characters that mapped to the unknown token.
    """
    idx = np.empty(len(seq), dtype=np.int64)
    bad: dict[str, int] = {}
    for i, c in enumerate(seq):
        j = _TOKEN_INDEX.get(c)
        if j is None:
            bad[c] = bad.get(c, 0) + 1
            j = _TOKEN_INDEX[UNKNOWN_TOKEN]
        idx[i] = j
    note = ""
    if bad:
        detail = ", ".join(f"{c!r} x{n}" for c, n in sorted(bad.items()))
        total = sum(bad.values())
        note = (f"strain {strain_id}: {total} unsupported residue(s) "
                f"mapped to unknown token: {detail}")
    return idx, note


def _embed_transformer(spec: ExtractorSpec, tokens: np.ndarray) -> np.ndarray:
    table = token_table(spec)
    freq = position_frequencies(spec)
    wrapped = np.concatenate(([_START], tokens, [_END]))
    positions = np.arange(len(wrapped), dtype=np.float64)
    states = table[wrapped] * (1.0 + 0.05 * np.cos(
        positions[:, None] * freq[None, :]))
    return states[1:-1].mean(axis=0)


def _embed_protvec(spec: ExtractorSpec, strain_id: str,
                   tokens: np.ndarray) -> np.ndarray:
    n = len(tokens) - 2
    if n < 1:
        raise ExtractorError(
            f"strain {strain_id}: sequence length {len(tokens)} is too "
            f"short for 3-mer extraction (need >= 3)")
    base = len(VOCAB)
    idx = tokens[:-2] * base * base + tokens[1:-1] * base + tokens[2:]
    return kmer_table(spec)[idx].mean(axis=0)


def embed_sequence(spec: ExtractorSpec, strain_id: str,
                   seq: str) -> tuple[np.ndarray, str]:
    """Embed one sequence; returns (vector, unsupported-residue note)."""
    tokens, note = _tokenize(strain_id, seq)
    if spec.model == "protvec":
        vec = _embed_protvec(spec, strain_id, tokens)
    else:
        vec = _embed_transformer(spec, tokens)
    if spec.precision == "float16":
        vec = vec.astype(np.float16).astype(np.float64)
    return vec, note


@dataclass
class ExtractionResult:
    """Vectors in input order plus per-strain unsupported-residue notes."""

    spec: ExtractorSpec
    ids: list[str]
    matrix: np.ndarray
    notes: list[str] = field(default_factory=list)


def extract_records(records: list[tuple[str, str]],
                    spec: ExtractorSpec) -> ExtractionResult:
    """Embed (strain_id, sequence) records in order."""
    ids = [strain_id for strain_id, _ in records]
    matrix = np.empty((len(records), spec.dim), dtype=np.float64)
    notes: list[str] = []
    for i, (strain_id, seq) in enumerate(records):
        matrix[i], note = embed_sequence(spec, strain_id, seq)
        if note:
            notes.append(note)
    return ExtractionResult(spec, ids, matrix, notes)
