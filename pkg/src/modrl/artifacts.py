"""Canonical hashing helpers used to chain artifacts together.

Checkpoints record the hash of the config that produced them; partitions
record the hash of their checkpoint file; intervention reports record both.
Commands refuse inputs whose recorded hashes do not match the recomputed
ones.
"""
from __future__ import annotations

import hashlib
import json


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(obj) -> str:
    """Stable hash of any JSON-serialisable configuration object."""
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()[:16]


def file_hash(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()[:16]
