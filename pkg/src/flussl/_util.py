"""Seed derivation and canonical hashing shared across the package.

All randomness flows from one master seed through named streams, so any
subcomputation can be re-run in isolation (or concurrently) without
changing results.
"""

from __future__ import annotations

import hashlib
import json
from typing import Any

import numpy as np


def seed_from(*parts: Any) -> int:
    """Derive a 64-bit seed from an arbitrary tuple of hashable parts.

    The derivation is stable across processes and platforms (sha256 of the
    repr of the parts), unlike Python's builtin hash().
    """
    payload = "\x1f".join(repr(p) for p in parts).encode("utf-8")
    digest = hashlib.sha256(payload).digest()
    return int.from_bytes(digest[:8], "little")


def rng_from(*parts: Any) -> np.random.Generator:
    """A numpy Generator seeded from a named stream."""
    return np.random.default_rng(seed_from(*parts))


def canonical_json(obj: Any) -> str:
    """Deterministic JSON used for digests and report files."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False)


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def digest_obj(obj: Any) -> str:
    """Hex digest of an object's canonical JSON form."""
    return sha256_hex(canonical_json(obj).encode("utf-8"))
