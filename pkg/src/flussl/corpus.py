"""Strain/titre ingestion and antigenic pair corpora.

Builds, per subtype, the labelled pair corpus (pairs with a complete
2x2 block of HI titres, labelled Similar or Variant by thresholding the
titre-ratio distance) and the unlabelled corpus (same-subtype pairs
lacking direct measurements).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Iterable, Sequence

SUBTYPES = ("H1N1", "H3N2", "H5N1", "H9N2")

# 20 standard residues plus X for unknown.
AMINO_ALPHABET = frozenset("ACDEFGHIKLMNPQRSTVWYX")

DEFAULT_THRESHOLD = 4.0
DEFAULT_CENSORED_FLOOR = 5.0


class CorpusError(ValueError):
    """Raised for malformed or inconsistent corpus inputs."""


class Label(IntEnum):
    SIMILAR = 0
    VARIANT = 1
    UNLABELLED = -1

    def __str__(self) -> str:  # CSV spelling
        return {0: "Similar", 1: "Variant", -1: "Unlabelled"}[int(self)]

    @classmethod
    def from_str(cls, text: str) -> "Label":
        try:
            return {"Similar": cls.SIMILAR, "Variant": cls.VARIANT,
                    "Unlabelled": cls.UNLABELLED}[text]
        except KeyError:
            raise CorpusError(f"unknown label {text!r}") from None


@dataclass(frozen=True)
class StrainRecord:
    strain_id: str
    subtype: str
    sequence: str

    def __post_init__(self) -> None:
        if not self.strain_id:
            raise CorpusError("empty strain_id")
        if self.subtype not in SUBTYPES:
            raise CorpusError(
                f"strain {self.strain_id}: unknown subtype {self.subtype!r}")
        if not self.sequence:
            raise CorpusError(f"strain {self.strain_id}: empty sequence")
        bad = set(self.sequence) - AMINO_ALPHABET
        if bad:
            raise CorpusError(
                f"strain {self.strain_id}: invalid residues {sorted(bad)}")


@dataclass(frozen=True)
class PairExample:
    """A canonically ordered same-subtype strain pair."""

    a: str
    b: str
    subtype: str
    d_dv: float | None
    label: Label

    def __post_init__(self) -> None:
        if not self.a < self.b:
            raise CorpusError(f"pair ({self.a}, {self.b}) not in canonical order")
        if self.label != Label.UNLABELLED and self.d_dv is None:
            raise CorpusError(f"labelled pair ({self.a}, {self.b}) missing d_dv")

    @property
    def key(self) -> str:
        return f"{self.a}|{self.b}"


@dataclass
class ThresholdConfig:
    """Per-subtype distance thresholds separating Similar from Variant."""

    default: float = DEFAULT_THRESHOLD
    per_subtype: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name, value in [("default", self.default), *self.per_subtype.items()]:
            if not value > 1:
                raise CorpusError(f"threshold {name}={value} must be > 1")

    def threshold_for(self, subtype: str) -> float:
        return self.per_subtype.get(subtype, self.default)


@dataclass
class HITitreTable:
    """(virus_id, antiserum_id) -> titre, after censoring and merging."""

    entries: dict[tuple[str, str], float]
    censored_floor: float = DEFAULT_CENSORED_FLOOR

    def get(self, virus_id: str, antiserum_id: str) -> float | None:
        return self.entries.get((virus_id, antiserum_id))


def archetti_horsfall(h_dd: float, h_vv: float, h_dv: float, h_vd: float) -> float:
    """Titre-ratio antigenic distance between two strains.

    sqrt((h_dd * h_vv) / (h_dv * h_vd)); 1.0 means the two strains are
    serologically indistinguishable. Symmetric under exchanging the two
    strains together with their antisera.
    """
    for name, value in (("h_dd", h_dd), ("h_vv", h_vv),
                        ("h_dv", h_dv), ("h_vd", h_vd)):
        if not value > 0:
            raise CorpusError(f"titre {name}={value} must be strictly positive")
    return math.sqrt((h_dd * h_vv) / (h_dv * h_vd))


def label_pair(d_dv: float, threshold: float) -> Label:
    """Similar below the threshold, Variant at or above it."""
    if not threshold > 1:
        raise CorpusError(f"threshold {threshold} must be > 1")
    return Label.SIMILAR if d_dv < threshold else Label.VARIANT


# ---------------------------------------------------------------------------
# File ingestion


def read_fasta(path: str | Path) -> list[StrainRecord]:
    """Parse strain sequences from FASTA with ``>strain_id|subtype`` headers."""
    path = Path(path)
    records: list[StrainRecord] = []
    seen: set[str] = set()
    header: tuple[str, str, int] | None = None
    chunks: list[str] = []

    def flush() -> None:
        if header is None:
            return
        strain_id, subtype, lineno = header
        seq = "".join(chunks).upper()
        try:
            record = StrainRecord(strain_id, subtype, seq)
        except CorpusError as exc:
            raise CorpusError(f"{path}:{lineno}: {exc}") from None
        if record.strain_id in seen:
            raise CorpusError(f"{path}:{lineno}: duplicate strain_id {strain_id!r}")
        seen.add(record.strain_id)
        records.append(record)

    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith(">"):
                flush()
                head = line[1:]
                if "|" not in head:
                    raise CorpusError(
                        f"{path}:{lineno}: header {line!r} lacks '|subtype'")
                strain_id, _, subtype = head.partition("|")
                header = (strain_id.strip(), subtype.strip(), lineno)
                chunks = []
            else:
                if header is None:
                    raise CorpusError(f"{path}:{lineno}: sequence before header")
                chunks.append(line)
    flush()
    if not records:
        raise CorpusError(f"{path}: no sequences found")
    return records


def write_fasta(strains: Sequence[StrainRecord], path: str | Path) -> None:
    """Write strains as FASTA with ``>strain_id|subtype`` headers."""
    lines: list[str] = []
    for rec in strains:
        lines.append(f">{rec.strain_id}|{rec.subtype}")
        for start in range(0, len(rec.sequence), 60):
            lines.append(rec.sequence[start:start + 60])
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_titres(
    path: str | Path,
    censored_floor: float = DEFAULT_CENSORED_FLOOR,
) -> tuple[HITitreTable, list[str]]:
    """Parse the HI titre CSV (``virus_id,antiserum_id,titre``).

    Censored readings written ``<N`` are substituted by ``censored_floor``.
    Repeated measurements of the same cell are merged by geometric mean.
    Returns the table plus ingest-log lines describing every substitution
    and merge.
    """
    path = Path(path)
    if not censored_floor > 0:
        raise CorpusError(f"censored_floor {censored_floor} must be positive")
    raw: dict[tuple[str, str], list[float]] = {}
    log: list[str] = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header.replace(" ", "") != "virus_id,antiserum_id,titre":
            raise CorpusError(
                f"{path}:1: expected header 'virus_id,antiserum_id,titre', "
                f"got {header!r}")
        for lineno, raw_line in enumerate(fh, start=2):
            line = raw_line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise CorpusError(f"{path}:{lineno}: expected 3 fields, got {len(parts)}")
            virus_id, antiserum_id, titre_text = (p.strip() for p in parts)
            if titre_text.startswith("<"):
                try:
                    limit = float(titre_text[1:])
                except ValueError:
                    raise CorpusError(
                        f"{path}:{lineno}: bad censored titre {titre_text!r}") from None
                if limit <= 0:
                    raise CorpusError(f"{path}:{lineno}: bad detection limit {limit}")
                value = censored_floor
                log.append(
                    f"censored: line {lineno} ({virus_id},{antiserum_id}) "
                    f"{titre_text} -> {value}")
            else:
                try:
                    value = float(titre_text)
                except ValueError:
                    raise CorpusError(
                        f"{path}:{lineno}: bad titre {titre_text!r}") from None
                if value <= 0:
                    raise CorpusError(
                        f"{path}:{lineno}: titre must be positive, got {value}")
            raw.setdefault((virus_id, antiserum_id), []).append(value)

    entries: dict[tuple[str, str], float] = {}
    for cell in sorted(raw):
        values = raw[cell]
        if len(values) == 1:
            entries[cell] = values[0]
        else:
            merged = math.exp(sum(math.log(v) for v in values) / len(values))
            entries[cell] = merged
            log.append(
                f"merged: ({cell[0]},{cell[1]}) geometric mean of "
                f"{len(values)} measurements {values} -> {merged:g}")
    return HITitreTable(entries, censored_floor), log


# ---------------------------------------------------------------------------
# Corpus construction


@dataclass
class Corpus:
    """Immutable snapshot of all same-subtype pairs, labelled and not."""

    pairs: list[PairExample]

    def subtypes(self) -> list[str]:
        return sorted({p.subtype for p in self.pairs})

    def labelled(self, subtype: str | None = None) -> list[PairExample]:
        return [p for p in self.pairs
                if p.label != Label.UNLABELLED
                and (subtype is None or p.subtype == subtype)]

    def unlabelled(self, subtype: str | None = None) -> list[PairExample]:
        return [p for p in self.pairs
                if p.label == Label.UNLABELLED
                and (subtype is None or p.subtype == subtype)]

    def counts(self) -> dict[str, dict[str, int]]:
        """Per-subtype pair bookkeeping: similar + variant + unlabelled = pairs."""
        out: dict[str, dict[str, int]] = {}
        for subtype in self.subtypes():
            row = {"similar": 0, "variant": 0, "unlabelled": 0}
            for pair in self.pairs:
                if pair.subtype != subtype:
                    continue
                if pair.label == Label.SIMILAR:
                    row["similar"] += 1
                elif pair.label == Label.VARIANT:
                    row["variant"] += 1
                else:
                    row["unlabelled"] += 1
            row["pairs"] = row["similar"] + row["variant"] + row["unlabelled"]
            out[subtype] = row
        return out


def build_corpus(
    strains: Sequence[StrainRecord],
    titres: HITitreTable,
    cfg: ThresholdConfig | None = None,
) -> tuple[Corpus, list[str]]:
    """Enumerate every same-subtype pair once and label those with full titres.

    A pair (a, b) is labelled when all four cells H_aa, H_bb, H_ab, H_ba are
    present; otherwise it joins the unlabelled corpus. Cross-subtype titre
    entries are dropped with a diagnostic; titre entries naming unknown
    strains are an error. Output ordering is deterministic: pairs sorted by
    (subtype, a, b).
    """
    cfg = cfg or ThresholdConfig()
    by_id = {s.strain_id: s for s in strains}
    if len(by_id) != len(strains):
        dupes = sorted({s.strain_id for s in strains
                        if sum(t.strain_id == s.strain_id for t in strains) > 1})
        raise CorpusError(f"duplicate strain ids: {dupes}")

    log: list[str] = []
    usable: dict[tuple[str, str], float] = {}
    for (virus_id, antiserum_id), value in titres.entries.items():
        if virus_id not in by_id:
            raise CorpusError(f"titre references unknown virus {virus_id!r}")
        if antiserum_id not in by_id:
            raise CorpusError(f"titre references unknown antiserum {antiserum_id!r}")
        if by_id[virus_id].subtype != by_id[antiserum_id].subtype:
            log.append(
                f"rejected cross-subtype titre ({virus_id},{antiserum_id}): "
                f"{by_id[virus_id].subtype} vs {by_id[antiserum_id].subtype}")
            continue
        usable[(virus_id, antiserum_id)] = value

    pairs: list[PairExample] = []
    by_subtype: dict[str, list[str]] = {}
    for strain in strains:
        by_subtype.setdefault(strain.subtype, []).append(strain.strain_id)

    for subtype in sorted(by_subtype):
        ids = sorted(by_subtype[subtype])
        threshold = cfg.threshold_for(subtype)
        for i, a in enumerate(ids):
            for b in ids[i + 1:]:
                cells = (usable.get((a, a)), usable.get((b, b)),
                         usable.get((a, b)), usable.get((b, a)))
                if all(c is not None for c in cells):
                    d_dv = archetti_horsfall(*cells)
                    pairs.append(PairExample(a, b, subtype, d_dv,
                                             label_pair(d_dv, threshold)))
                else:
                    pairs.append(PairExample(a, b, subtype, None, Label.UNLABELLED))
    return Corpus(pairs), log


# ---------------------------------------------------------------------------
# Corpus snapshot CSV

CORPUS_HEADER = "a,b,subtype,d_dv,label"


def write_corpus_csv(corpus: Corpus, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(CORPUS_HEADER + "\n")
        for pair in corpus.pairs:
            d = "" if pair.d_dv is None else repr(pair.d_dv)
            fh.write(f"{pair.a},{pair.b},{pair.subtype},{d},{pair.label}\n")


def read_corpus_csv(path: str | Path) -> Corpus:
    path = Path(path)
    pairs: list[PairExample] = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != CORPUS_HEADER:
            raise CorpusError(f"{path}:1: expected header {CORPUS_HEADER!r}")
        for lineno, raw_line in enumerate(fh, start=2):
            line = raw_line.rstrip("\n")
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 5:
                raise CorpusError(f"{path}:{lineno}: expected 5 fields")
            a, b, subtype, d_text, label_text = parts
            d_dv = None if d_text == "" else float(d_text)
            try:
                pairs.append(PairExample(a, b, subtype, d_dv,
                                         Label.from_str(label_text)))
            except CorpusError as exc:
                raise CorpusError(f"{path}:{lineno}: {exc}") from None
    return Corpus(pairs)


def format_counts_table(counts: dict[str, dict[str, int]]) -> str:
    """Fixed-width per-subtype count summary for the ingest log."""
    lines = [f"{'subtype':<8}{'pairs':>8}{'similar':>9}{'variant':>9}{'unlabelled':>12}"]
    totals = {"pairs": 0, "similar": 0, "variant": 0, "unlabelled": 0}
    for subtype, row in counts.items():
        lines.append(f"{subtype:<8}{row['pairs']:>8}{row['similar']:>9}"
                     f"{row['variant']:>9}{row['unlabelled']:>12}")
        for key in totals:
            totals[key] += row[key]
    lines.append(f"{'total':<8}{totals['pairs']:>8}{totals['similar']:>9}"
                 f"{totals['variant']:>9}{totals['unlabelled']:>12}")
    return "\n".join(lines)
