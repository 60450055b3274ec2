"""Canonical JSON helpers.

Reports and corpus manifests are emitted in a single canonical form (sorted
keys, fixed separators, trailing newline) so identical inputs produce
byte-identical files.
"""

from __future__ import annotations

import dataclasses
import json


def to_jsonable(obj):
    """Recursively convert dataclasses/tuples/numpy scalars to JSON types."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        return obj.item()
    return obj


def canonical_json(obj) -> str:
    """Deterministic JSON text: sorted keys, no whitespace, newline-terminated."""
    return json.dumps(to_jsonable(obj), sort_keys=True, separators=(",", ":"), allow_nan=False) + "\n"


def write_json(path, obj):
    with open(path, "w", encoding="ascii") as fh:
        fh.write(canonical_json(obj))


def write_jsonl(path, records):
    with open(path, "w", encoding="ascii") as fh:
        for record in records:
            fh.write(canonical_json(record))
