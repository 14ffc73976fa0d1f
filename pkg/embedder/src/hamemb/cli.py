"""Command line entry point: extract embeddings from a FASTA file."""

from __future__ import annotations

import argparse
import sys

from .embfile import FORMATS, write_embedding_file
from .fasta import FastaError, read_fasta
from .models import (ExtractorError, ExtractorSpec, MODEL_ALIASES,
                     PRECISIONS, extract_records)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2


class ConfigError(ValueError):
    """Raised for unusable command lines or settings."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise ConfigError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="hamemb",
                     description="Extract per-strain protein embeddings "
                                 "from FASTA into the .emb file formats.")
    sub = parser.add_subparsers(dest="command")
    p_ext = sub.add_parser("extract", help="embed every strain in a FASTA")
    p_ext.add_argument("--model", required=True,
                       help=f"one of {sorted(set(MODEL_ALIASES))}")
    p_ext.add_argument("--fasta", required=True, help="input FASTA path")
    p_ext.add_argument("--out", required=True, help="output embedding path")
    p_ext.add_argument("--format", choices=FORMATS, default="text")
    p_ext.add_argument("--seed", type=int, default=0)
    p_ext.add_argument("--precision", choices=PRECISIONS, default="float32")
    p_ext.add_argument("--batch-size", type=int, default=8)
    p_ext.add_argument("--device", default="cpu")
    return parser


def cmd_extract(args: argparse.Namespace) -> int:
    try:
        spec = ExtractorSpec(model=args.model, seed=args.seed,
                             batch_size=args.batch_size, device=args.device,
                             precision=args.precision)
    except ExtractorError as exc:
        raise ConfigError(str(exc)) from exc
    records = read_fasta(args.fasta)
    result = extract_records(records, spec)
    for note in result.notes:
        print(note, file=sys.stderr)
    write_embedding_file(args.out, spec.model, result.ids, result.matrix,
                         fmt=args.format)
    print(f"wrote {args.out}: model={spec.model} dim={spec.dim} "
          f"count={len(result.ids)} ({args.format}, seed={spec.seed}, "
          f"precision={spec.precision})")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise ConfigError("no command given (see --help)")
        return cmd_extract(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"missing input: {exc}", file=sys.stderr)
        return EXIT_IO
    except (FastaError, ExtractorError) as exc:
        print(f"bad input: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
