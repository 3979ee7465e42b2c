"""Deterministic report writers with an embedded run manifest."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path

import numpy as np

from . import __version__

__all__ = ["file_sha256", "manifest", "to_jsonable", "dumps_json", "write_json", "csv_text", "write_csv"]


def file_sha256(path) -> str | None:
    if path is None:
        return None
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def manifest(command: str, model_path=None, parameters: dict | None = None, seed=None, outputs=()) -> dict:
    """Run manifest; no timestamps or host data so reruns are byte-identical."""
    return {
        "tool": "cepp",
        "version": __version__,
        "command": command,
        "model": None if model_path is None else str(model_path),
        "model_sha256": file_sha256(model_path),
        "parameters": parameters or {},
        "seed": seed,
        "outputs": [str(p) for p in outputs],
    }


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, frozenset):
        return sorted(to_jsonable(v) for v in obj)
    return obj


def dumps_json(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_json(obj), encoding="utf-8")
    return path


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return v


def csv_text(header, rows, meta: dict | None = None) -> str:
    buf = io.StringIO()
    if meta is not None:
        buf.write("# manifest: " + json.dumps(to_jsonable(meta), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def write_csv(path, header, rows, meta: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(csv_text(header, rows, meta), encoding="utf-8")
    return path
