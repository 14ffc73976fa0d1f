"""FASTA reading for embedding extraction.

Headers follow the ``>strain_id|subtype|...`` convention used by the
corpus tooling: the strain id is everything before the first ``|``.
Headers without a ``|`` fall back to the first whitespace token, so
plain protein FASTA files work too. Sequences are uppercased and may
span multiple lines.
"""

from __future__ import annotations

from pathlib import Path


class FastaError(ValueError):
    """Raised for malformed FASTA input."""


def read_fasta(path: str | Path) -> list[tuple[str, str]]:
    """Return (strain_id, sequence) pairs in file order."""
    path = Path(path)
    records: list[tuple[str, str]] = []
    seen: set[str] = set()
    header: tuple[str, int] | None = None
    chunks: list[str] = []

    def flush() -> None:
        if header is None:
            return
        strain_id, lineno = header
        seq = "".join(chunks).upper()
        if not seq:
            raise FastaError(f"{path}:{lineno}: strain {strain_id!r} has "
                             f"an empty sequence")
        if strain_id in seen:
            raise FastaError(f"{path}:{lineno}: duplicate strain_id "
                             f"{strain_id!r}")
        seen.add(strain_id)
        records.append((strain_id, seq))

    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith(">"):
                flush()
                head = line[1:].strip()
                strain_id = head.partition("|")[0].strip() if "|" in head \
                    else head.split()[0] if head else ""
                if not strain_id:
                    raise FastaError(f"{path}:{lineno}: empty header")
                header = (strain_id, lineno)
                chunks = []
            else:
                if header is None:
                    raise FastaError(f"{path}:{lineno}: sequence before "
                                     f"header")
                chunks.append(line)
    flush()
    if not records:
        raise FastaError(f"{path}: no sequences found")
    return records
