"""Embedding file writers.

Two encodings share one schema. Text: a ``#model=<name>,dim=<D>,
count=<N>`` header line, then ``strain_id,v1,...,vD`` rows. Binary:
magic ``EMB1``, a length-prefixed UTF-8 model name, little-endian u32
dim and count, then length-prefixed ids each followed by dim 32-bit
little-endian floats. Values pass through 32-bit precision in both
encodings so the two forms of one extraction load back identically.

Rows are sorted by strain id and files are written to a temp file in
the destination directory then atomically renamed, so readers never
observe a partial file.
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

BINARY_MAGIC = b"EMB1"

FORMATS = ("text", "binary")


def _text_bytes(model: str, dim: int, rows: list[tuple[str, np.ndarray]]) \
        -> bytes:
    lines = [f"#model={model},dim={dim},count={len(rows)}"]
    for strain_id, vec in rows:
        cells = ",".join(repr(float(v)) for v in vec.astype(np.float32))
        lines.append(f"{strain_id},{cells}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def _binary_bytes(model: str, dim: int, rows: list[tuple[str, np.ndarray]]) \
        -> bytes:
    name = model.encode("utf-8")
    parts = [BINARY_MAGIC, struct.pack("<I", len(name)), name,
             struct.pack("<II", dim, len(rows))]
    for strain_id, vec in rows:
        raw = strain_id.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
        parts.append(vec.astype("<f4").tobytes())
    return b"".join(parts)


def write_embedding_file(path: str | Path, model: str, ids: list[str],
                         matrix: np.ndarray, fmt: str = "text") -> None:
    """Write one vector per strain id, atomically."""
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r} (known: {FORMATS})")
    if len(ids) != len(matrix):
        raise ValueError(f"{len(ids)} ids for {len(matrix)} vectors")
    path = Path(path)
    dim = int(matrix.shape[1])
    rows = sorted(zip(ids, matrix), key=lambda r: r[0])
    blob = (_text_bytes if fmt == "text" else _binary_bytes)(model, dim, rows)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise
