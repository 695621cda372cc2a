"""Deterministic artifact IO: canonical JSON bytes, config hashing, and the
JSONL/CSV codecs shared by the pipeline stages.

Canonical form sorts keys, uses compact separators, encodes floats with the
shortest round-trip repr, and maps non-finite values to null, so identical
inputs always serialize to identical bytes.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from typing import Any, Iterable

import numpy as np

from .core import ConfigError, ContractViolation, SeriesWindow

# config fields that do not affect results and are excluded from the hash
VOLATILE_CONFIG_KEYS = ("output_dir", "threads")


def canonical(obj: Any) -> Any:
    """Reduce to plain JSON types: numpy scalars/arrays become Python values,
    tuples become lists, NaN and infinities become null."""
    if isinstance(obj, dict):
        out = {}
        for key, value in obj.items():
            if not isinstance(key, str):
                raise ContractViolation(f"artifact keys must be strings, got {key!r}")
            out[key] = canonical(value)
        return out
    if isinstance(obj, (list, tuple)):
        return [canonical(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [canonical(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if obj is None or isinstance(obj, str):
        return obj
    raise ContractViolation(f"value {obj!r} is not artifact-serializable")


def dump_json(obj: Any) -> str:
    return json.dumps(canonical(obj), sort_keys=True, separators=(",", ":"), allow_nan=False)


def write_json(path: str, obj: Any) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dump_json(obj))
        fh.write("\n")


def read_json(path: str) -> Any:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def write_jsonl(path: str, rows: Iterable[Any]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(dump_json(row))
            fh.write("\n")
            n += 1
    return n


def read_jsonl(path: str) -> list[Any]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out


def write_csv(path: str, header: list[str], rows: Iterable[Iterable[Any]]) -> None:
    """Plain CSV with LF newlines; floats keep their round-trip repr."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(["" if v is None else v for v in (canonical(c) for c in row)])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(buf.getvalue())


def config_hash(mapping: dict) -> str:
    """Hash of the result-affecting config fields (stable across runs that
    differ only in where they write or how many threads they use)."""
    pruned = {k: v for k, v in mapping.items() if k not in VOLATILE_CONFIG_KEYS}
    digest = hashlib.sha256(dump_json(pruned).encode("utf-8")).hexdigest()
    return digest[:16]


def window_record(win: SeriesWindow) -> dict:
    """JSONL row for one window; hidden slots serialize as null."""
    return {
        "series_id": win.series_id,
        "window_index": win.window_index,
        "values": [float(v) if m == 1 else None for v, m in zip(win.values, win.mask)],
        "mask": [int(b) for b in win.mask],
        "normalized": bool(win.normalized),
    }


def window_from_record(rec: dict) -> SeriesWindow:
    values = np.array(
        [float("nan") if v is None else float(v) for v in rec["values"]], dtype=np.float64
    )
    mask = np.array(rec["mask"], dtype=np.uint8)
    return SeriesWindow.create(
        rec["series_id"],
        int(rec["window_index"]),
        values,
        mask,
        normalized=bool(rec["normalized"]),
    )


def require_artifact(path: str, produced_by: str) -> str:
    """Fail with the command that produces a missing upstream artifact."""
    if not os.path.exists(path):
        raise ConfigError(
            f"missing artifact {os.path.basename(path)!r}; run '{produced_by}' first"
        )
    return path
