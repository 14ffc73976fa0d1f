"""Report serialization: deterministic JSON, flat CSV, figure CSVs, SVGs.

The JSON document is the single source of truth for a sweep: schema
version, config echo, per-cell score rows and fold diagnostics, and a
sha256 digest over the canonical document body. Nothing in it depends
on wall-clock time or thread count, so identical config + seed gives a
byte-identical file. The delimited outputs are projections of the JSON:
a flat CSV with one row per (cell, scope), a grouped-bar CSV holding the
pooled scores across supervision ratios, and per-subtype panel CSVs.
SVG bar charts are rendered from the same rows with a pinned hash salt
and no embedded creation date, so reruns reproduce them byte for byte.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from .corpus import SUBTYPES
from .experiment import POOLED, POOLED_CLASS, CellResult, RunResult

SCHEMA_VERSION = 1

FLAT_HEADER = "embedding,paradigm,learner,ratio,scope,mean_f1,ci_low,ci_high,per_fold"
BARS_HEADER = "embedding,paradigm,learner,ratio,mean_f1,ci_low,ci_high"

BARS_FILE = "bars_by_ratio.csv"
BARS_CLASS_FILE = "bars_by_ratio_class_macro.csv"


class ReportError(ValueError):
    """Raised for malformed or wrong-version report documents."""


def _cell_dict(cell: CellResult) -> dict:
    return {
        "embedding": cell.embedding,
        "paradigm": cell.paradigm,
        "learner": cell.learner,
        "ratio": float(cell.ratio),
        "failed": bool(cell.failed),
        "error": cell.error,
        "leakage_checks": int(cell.leakage_checks),
        "rows": [
            {
                "scope": row.scope,
                "mean_f1": float(row.mean_f1),
                "ci_low": float(row.ci_low),
                "ci_high": float(row.ci_high),
                "per_fold": [float(v) for v in row.per_fold],
            }
            for row in cell.rows
        ],
        "folds": [
            {
                "fold_no": int(rec.fold_no),
                "chosen": rec.chosen,
                "best_inner_mean": float(rec.best_inner_mean),
                "n_retained": int(rec.n_retained),
                "n_pul": int(rec.n_pul),
                "n_test": int(rec.n_test),
                "n_inner_used": int(rec.n_inner_used),
                "n_promotions": len(rec.promotions),
                "graph_converged": rec.graph_converged,
                "grid_failures": [list(pair) for pair in rec.grid_failures],
            }
            for rec in cell.folds
        ],
    }


def report_dict(result: RunResult, config_echo: dict) -> dict:
    """JSON-ready document body, without the digest field."""
    return {
        "schema_version": SCHEMA_VERSION,
        "config": config_echo,
        "seed": int(result.seed),
        "combine": result.combine,
        "outer_k": int(result.outer_k),
        "inner_k": int(result.inner_k),
        "stratified_by": result.stratified_by,
        "ratios": [float(r) for r in result.ratios],
        "embeddings": list(result.embeddings),
        "cells": [_cell_dict(c) for c in result.cells],
    }


def report_digest(doc: dict) -> str:
    """sha256 over the canonical JSON body, ignoring any digest field."""
    body = {k: v for k, v in doc.items() if k != "digest"}
    canon = json.dumps(body, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def write_report_json(result: RunResult, config_echo: dict,
                      path: str | Path) -> str:
    """Serialize a sweep to disk; returns the document digest."""
    doc = report_dict(result, config_echo)
    doc["digest"] = report_digest(doc)
    text = json.dumps(doc, sort_keys=True, indent=2)
    Path(path).write_text(text + "\n", encoding="utf-8")
    return doc["digest"]


def read_report_json(path: str | Path) -> dict:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ReportError(f"{path}: not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ReportError(f"{path}: report must be a JSON object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ReportError(
            f"{path}: schema version {version!r} does not match "
            f"supported version {SCHEMA_VERSION}")
    stored = doc.get("digest")
    if stored is not None and stored != report_digest(doc):
        raise ReportError(f"{path}: digest does not match document body")
    return doc


# ---------------------------------------------------------------------------
# Delimited projections


def _score_lines(doc: dict, scope: str) -> list[str]:
    lines = []
    for cell in doc["cells"]:
        if cell["failed"]:
            continue
        for row in cell["rows"]:
            if row["scope"] != scope:
                continue
            lines.append(",".join([
                cell["embedding"], cell["paradigm"], cell["learner"],
                repr(cell["ratio"]), repr(row["mean_f1"]),
                repr(row["ci_low"]), repr(row["ci_high"]),
            ]))
    return lines


def write_flat_csv(doc: dict, path: str | Path) -> None:
    """One row per (cell, scope); failed cells contribute no rows."""
    lines = [FLAT_HEADER]
    for cell in doc["cells"]:
        if cell["failed"]:
            continue
        for row in cell["rows"]:
            folds = ";".join(repr(v) for v in row["per_fold"])
            lines.append(",".join([
                cell["embedding"], cell["paradigm"], cell["learner"],
                repr(cell["ratio"]), row["scope"], repr(row["mean_f1"]),
                repr(row["ci_low"]), repr(row["ci_high"]), folds,
            ]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


PROMOTIONS_HEADER = ("embedding,paradigm,learner,ratio,fold_no,"
                     "iteration,pair_id,pseudo_label,confidence")


def write_promotions_csv(result: RunResult, path: str | Path) -> None:
    """Audit trail of every pseudo-label promoted during self-training."""
    lines = [PROMOTIONS_HEADER]
    for cell in result.cells:
        for rec in cell.folds:
            for prom in rec.promotions:
                lines.append(",".join([
                    cell.embedding, cell.paradigm, cell.learner,
                    repr(float(cell.ratio)), str(rec.fold_no),
                    str(prom.iteration), prom.pair_id,
                    str(int(prom.pseudo_label)), repr(float(prom.confidence)),
                ]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_figure_csvs(doc: dict, out_dir: str | Path,
                      per_subtype: bool = False) -> list[Path]:
    """Grouped-bar CSVs of pooled scores by ratio, plus subtype panels.

    Both pooled aggregations are emitted side by side: macro over
    subtypes and macro over classes. With per_subtype, one panel CSV
    per known subtype is written even when the report has no rows for
    it, so downstream plotting sees a fixed file set.
    """
    out_dir = Path(out_dir)
    written = []
    for name, scope in ((BARS_FILE, POOLED), (BARS_CLASS_FILE, POOLED_CLASS)):
        path = out_dir / name
        lines = [BARS_HEADER] + _score_lines(doc, scope)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written.append(path)
    if per_subtype:
        for subtype in SUBTYPES:
            path = out_dir / f"panel_{subtype}.csv"
            lines = [BARS_HEADER] + _score_lines(doc, subtype)
            path.write_text("\n".join(lines) + "\n", encoding="utf-8")
            written.append(path)
    return written


# ---------------------------------------------------------------------------
# Static figures


def _bar_chart(rows: list[tuple[str, float, float, float, float]],
               title: str, path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with plt.rc_context({"svg.hashsalt": "flussl"}):
        fig, ax = plt.subplots(figsize=(8, 4.5))
        ratios = sorted({r[1] for r in rows})
        series = sorted({r[0] for r in rows})
        width = 0.8 / max(len(series), 1)
        for i, name in enumerate(series):
            xs, ys, lo, hi = [], [], [], []
            for label, ratio, mean, ci_lo, ci_hi in rows:
                if label != name:
                    continue
                xs.append(ratios.index(ratio) + (i - (len(series) - 1) / 2) * width)
                ys.append(mean)
                lo.append(mean - ci_lo)
                hi.append(ci_hi - mean)
            ax.bar(xs, ys, width=width * 0.9, label=name,
                   yerr=[lo, hi], capsize=2)
        ax.set_xticks(range(len(ratios)))
        ax.set_xticklabels([f"{r:g}" for r in ratios])
        ax.set_xlabel("supervision ratio")
        ax.set_ylabel("mean F1")
        ax.set_ylim(0, 1.05)
        ax.set_title(title)
        if series:
            ax.legend(fontsize=7)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)


def _svg_rows(doc: dict, scope: str) -> list[tuple[str, float, float, float, float]]:
    rows = []
    for cell in doc["cells"]:
        if cell["failed"]:
            continue
        name = f"{cell['embedding']}/{cell['paradigm']}/{cell['learner']}"
        for row in cell["rows"]:
            if row["scope"] == scope:
                rows.append((name, cell["ratio"], row["mean_f1"],
                             row["ci_low"], row["ci_high"]))
    return rows


def render_figure_svgs(doc: dict, out_dir: str | Path,
                       per_subtype: bool = False) -> list[Path]:
    """Bar charts mirroring the figure CSVs, one SVG per family."""
    out_dir = Path(out_dir)
    written = []
    for name, scope, title in (
            (BARS_FILE, POOLED, "pooled mean F1 (macro over subtypes)"),
            (BARS_CLASS_FILE, POOLED_CLASS, "pooled mean F1 (macro over classes)")):
        path = out_dir / name.replace(".csv", ".svg")
        _bar_chart(_svg_rows(doc, scope), title, path)
        written.append(path)
    if per_subtype:
        for subtype in SUBTYPES:
            path = out_dir / f"panel_{subtype}.svg"
            _bar_chart(_svg_rows(doc, subtype), f"mean F1, {subtype}", path)
            written.append(path)
    return written
