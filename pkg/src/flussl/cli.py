"""Command-line orchestration: ingest, featurize, run, report, synth.

Every command reads one TOML config (flags override file values), writes
only under the output directory, and is idempotent on identical inputs.
Exit codes: 0 success, 1 configuration error, 2 missing or malformed
input, 3 sweep finished with failed cells.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import (
    ConfigError,
    RunConfig,
    apply_overrides,
    config_to_dict,
    config_to_toml,
    load_config,
    settings_from_config,
    threshold_config,
)
from .corpus import (
    CorpusError,
    build_corpus,
    format_counts_table,
    read_corpus_csv,
    read_fasta,
    read_titres,
    write_corpus_csv,
    write_fasta,
)
from .experiment import list_cells, run_experiment
from .features import (
    EmbeddingError,
    featurize_corpus,
    load_embeddings,
    write_embeddings,
)
from .report import (
    ReportError,
    read_report_json,
    render_figure_svgs,
    write_figure_csvs,
    write_flat_csv,
    write_promotions_csv,
    write_report_json,
)
from .synthetic import SyntheticSpec, make_synthetic

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2
EXIT_PARTIAL = 3


class _Parser(argparse.ArgumentParser):
    """argparse flag misuse is a configuration error (exit 1, not 2)."""

    def error(self, message: str) -> None:  # noqa: D102 - argparse hook
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _add_global_flags(parser: argparse.ArgumentParser,
                      suppress: bool) -> None:
    # the same flags live on the root parser and on every subcommand, so
    # they are accepted on either side of the command word; the subcommand
    # copies default to SUPPRESS so they only override when actually given
    kw = {"default": argparse.SUPPRESS} if suppress else {}
    flag_kw: dict = {"action": "store_true"}
    if suppress:
        flag_kw["default"] = argparse.SUPPRESS
    parser.add_argument("--config", help="TOML config file", **kw)
    parser.add_argument("--seed", type=int, help="master seed override", **kw)
    parser.add_argument("--out", help="output directory override", **kw)
    parser.add_argument("--threads", type=int,
                        help="worker thread override", **kw)
    parser.add_argument("--dry-run", help="print the plan without computing "
                        "or writing", **flag_kw)
    parser.add_argument("--print-effective-config", help="print the merged "
                        "config as TOML and exit", **flag_kw)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="flussl",
                     description="Antigenic similarity experiments over "
                                 "haemagglutinin pair embeddings.")
    _add_global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p_ingest = sub.add_parser("ingest", help="build corpus from FASTA + titres")
    p_ingest.add_argument("--sequences", help="FASTA path override")
    p_ingest.add_argument("--titres", help="titre CSV path override")

    p_feat = sub.add_parser("featurize", help="write pair-feature matrices")
    p_feat.add_argument("--corpus", help="corpus CSV (default <out>/corpus.csv)")
    p_feat.add_argument("--embeddings", nargs="+",
                        help="embedding file(s) override")

    p_run = sub.add_parser("run", help="run the experiment sweep")
    p_run.add_argument("--corpus", help="corpus CSV (default <out>/corpus.csv)")
    p_run.add_argument("--embeddings", nargs="+",
                       help="embedding file(s) override")
    p_run.add_argument("--ratios", nargs="+", type=float,
                       help="restrict supervision ratios")

    p_rep = sub.add_parser("report", help="figure CSVs and SVGs from a report")
    p_rep.add_argument("--report", help="report JSON (default <out>/report.json)")
    p_rep.add_argument("--per-subtype", action="store_true",
                       help="also write one panel per subtype")
    p_rep.add_argument("--no-svg", action="store_true",
                       help="skip SVG rendering, write only CSVs")

    p_synth = sub.add_parser("synth", help="write a synthetic fixture corpus")
    p_synth.add_argument("--subtypes", nargs="+", default=["H1N1", "H3N2"])
    p_synth.add_argument("--strains-per-subtype", type=int, default=12)
    p_synth.add_argument("--coords", nargs="+", type=int, default=[0, 1, 2, 3],
                         help="antigenic cluster coordinates")
    p_synth.add_argument("--noise", type=float, default=0.3)
    p_synth.add_argument("--dim", type=int, default=12)
    p_synth.add_argument("--labelled-fraction", type=float, default=1.0)

    for sub_parser in (p_ingest, p_feat, p_run, p_rep, p_synth):
        _add_global_flags(sub_parser, suppress=True)
    return parser


def _effective_config(args: argparse.Namespace) -> RunConfig:
    if args.config is not None:
        cfg = load_config(args.config)
    else:
        cfg = RunConfig()
    ratios = getattr(args, "ratios", None)
    return apply_overrides(cfg, seed=args.seed, out=args.out,
                           threads=args.threads,
                           ratios=tuple(ratios) if ratios else None)


def _out_dir(cfg: RunConfig, dry_run: bool) -> Path:
    out = Path(cfg.out)
    if not dry_run:
        out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_ingest(cfg: RunConfig, args: argparse.Namespace) -> int:
    sequences = args.sequences or cfg.sequences
    titres = args.titres or cfg.titres
    if not sequences:
        raise ConfigError("ingest needs [paths] sequences (or --sequences)")
    if not titres:
        raise ConfigError("ingest needs [paths] titres (or --titres)")
    out = _out_dir(cfg, args.dry_run)
    if args.dry_run:
        print(f"would ingest {sequences} + {titres} "
              f"-> {out / 'corpus.csv'}, {out / 'ingest.log'}")
        return EXIT_OK
    strains = read_fasta(sequences)
    table, titre_log = read_titres(titres, censored_floor=cfg.censored_floor)
    corpus, corpus_log = build_corpus(strains, table, threshold_config(cfg))
    write_corpus_csv(corpus, out / "corpus.csv")
    counts = format_counts_table(corpus.counts())
    log_lines = titre_log + corpus_log + ["", counts]
    (out / "ingest.log").write_text("\n".join(log_lines) + "\n",
                                    encoding="utf-8")
    print(counts)
    print(f"wrote {out / 'corpus.csv'} ({len(corpus.pairs)} pairs), "
          f"{out / 'ingest.log'} ({len(titre_log) + len(corpus_log)} notes)")
    return EXIT_OK


def _load_stores(cfg: RunConfig, args: argparse.Namespace) -> list:
    paths = getattr(args, "embeddings", None) or list(cfg.embeddings)
    if not paths:
        raise ConfigError("need [paths] embeddings (or --embeddings)")
    return [load_embeddings(p) for p in paths]


def _load_corpus(cfg: RunConfig, args: argparse.Namespace):
    path = getattr(args, "corpus", None) or str(Path(cfg.out) / "corpus.csv")
    return read_corpus_csv(path)


def cmd_featurize(cfg: RunConfig, args: argparse.Namespace) -> int:
    out = _out_dir(cfg, args.dry_run)
    if args.dry_run:
        paths = getattr(args, "embeddings", None) or list(cfg.embeddings)
        names = ", ".join(paths) if paths else "(no embeddings configured)"
        print(f"would featurize corpus with {names} -> {out}/features_<model>.npz")
        return EXIT_OK
    corpus = _load_corpus(cfg, args)
    stores = _load_stores(cfg, args)
    for store in stores:
        x, y = featurize_corpus(store, corpus.pairs, combine=cfg.combine)
        ids = np.array([p.key for p in corpus.pairs])
        path = out / f"features_{store.model_name}.npz"
        np.savez(path, x=x, y=y, ids=ids)
        print(f"wrote {path}: x{x.shape}, y{y.shape} ({store.model_name}, "
              f"combine={cfg.combine})")
    return EXIT_OK


def cmd_run(cfg: RunConfig, args: argparse.Namespace) -> int:
    settings = settings_from_config(cfg)
    out = _out_dir(cfg, args.dry_run)
    if args.dry_run:
        paths = getattr(args, "embeddings", None) or list(cfg.embeddings)
        names = [Path(p).stem for p in paths] or ["<embeddings>"]
        cells = list_cells(names, settings)
        print(f"{len(cells)} cells (seed={settings.seed}, "
              f"outer_k={settings.outer_k}, inner_k={settings.inner_k}):")
        for ck in cells:
            print(f"  {ck.key()}")
        return EXIT_OK
    corpus = _load_corpus(cfg, args)
    stores = _load_stores(cfg, args)
    result = run_experiment(corpus, stores, settings)
    digest = write_report_json(result, config_to_dict(cfg),
                               out / "report.json")
    doc = read_report_json(out / "report.json")
    write_flat_csv(doc, out / "scores.csv")
    write_promotions_csv(result, out / "promotions.csv")
    print(f"wrote {out / 'report.json'} (digest {digest[:16]}...), "
          f"{out / 'scores.csv'}, {out / 'promotions.csv'}")
    failed = result.failed_cells()
    if failed:
        print(f"{len(failed)} of {len(result.cells)} cells failed:",
              file=sys.stderr)
        for key in failed:
            print(f"  {key}", file=sys.stderr)
        return EXIT_PARTIAL
    print(f"{len(result.cells)} cells ok, "
          f"{result.total_leakage_checks()} leakage checks passed")
    return EXIT_OK


def cmd_report(cfg: RunConfig, args: argparse.Namespace) -> int:
    report_path = args.report or str(Path(cfg.out) / "report.json")
    out = _out_dir(cfg, args.dry_run)
    if args.dry_run:
        what = "CSVs" if args.no_svg else "CSVs + SVGs"
        print(f"would project {report_path} -> figure {what} under {out}")
        return EXIT_OK
    if not Path(report_path).exists():
        raise FileNotFoundError(f"report not found: {report_path}")
    doc = read_report_json(report_path)
    written = write_figure_csvs(doc, out, per_subtype=args.per_subtype)
    if not args.no_svg:
        written += render_figure_svgs(doc, out, per_subtype=args.per_subtype)
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def cmd_synth(cfg: RunConfig, args: argparse.Namespace) -> int:
    subtypes = tuple(s for part in args.subtypes for s in part.split(",") if s)
    try:
        spec = SyntheticSpec(subtypes=subtypes,
                             strains_per_subtype=args.strains_per_subtype,
                             cluster_coords=tuple(args.coords),
                             noise_scale=args.noise, dim=args.dim,
                             labelled_fraction=args.labelled_fraction)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out = _out_dir(cfg, args.dry_run)
    if args.dry_run:
        print(f"would write synthetic fixture (seed={cfg.seed}) under {out}")
        return EXIT_OK
    data = make_synthetic(spec, seed=cfg.seed)
    write_fasta(data.strains, out / "strains.fasta")
    (out / "titres.csv").write_text("\n".join(data.titre_lines) + "\n",
                                    encoding="utf-8")
    emb_path = out / f"{spec.model_name}.emb"
    write_embeddings(data.store, emb_path, encoding="text")
    print(f"wrote {out / 'strains.fasta'}, {out / 'titres.csv'}, {emb_path}")
    print("config snippet:")
    print(f'  [paths]\n  sequences = "{out / "strains.fasta"}"\n'
          f'  titres = "{out / "titres.csv"}"\n  embeddings = ["{emb_path}"]')
    return EXIT_OK


_COMMANDS = {
    "ingest": cmd_ingest,
    "featurize": cmd_featurize,
    "run": cmd_run,
    "report": cmd_report,
    "synth": cmd_synth,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _effective_config(args)
        if args.print_effective_config:
            print(config_to_toml(cfg), end="")
            return EXIT_OK
        if args.command is None:
            raise ConfigError("no command given (see --help)")
        return _COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"missing input: {exc}", file=sys.stderr)
        return EXIT_IO
    except (CorpusError, EmbeddingError, ReportError) as exc:
        print(f"bad input: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
