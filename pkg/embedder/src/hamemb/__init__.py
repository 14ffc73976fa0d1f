"""Offline per-strain protein embedding extraction.

Reads haemagglutinin FASTA files and writes one embedding vector per
strain in a text or binary file format shared with the downstream
analysis tooling. All models run in a seeded deterministic mode; see
``hamemb.models`` for the exact constructions.
"""

from .embfile import BINARY_MAGIC, FORMATS, write_embedding_file
from .fasta import FastaError, read_fasta
from .models import (AMINO_ACIDS, ExtractionResult, ExtractorError,
                     ExtractorSpec, MODEL_ALIASES, MODEL_DIMS, PRECISIONS,
                     UNKNOWN_TOKEN, VOCAB, canonical_model, embed_sequence,
                     extract_records, kmer_table, position_frequencies,
                     token_table)

__all__ = [
    "AMINO_ACIDS",
    "BINARY_MAGIC",
    "ExtractionResult",
    "ExtractorError",
    "ExtractorSpec",
    "FORMATS",
    "FastaError",
    "MODEL_ALIASES",
    "MODEL_DIMS",
    "PRECISIONS",
    "UNKNOWN_TOKEN",
    "VOCAB",
    "canonical_model",
    "embed_sequence",
    "extract_records",
    "kmer_table",
    "position_frequencies",
    "read_fasta",
    "token_table",
    "write_embedding_file",
]
