"""Deterministic CSV and JSON writers.

Every file starts with provenance: ``# key: value`` comment lines in CSV,
a ``meta`` object in JSON. Nothing time-dependent is written, and floats
use Python's shortest round-trip ``repr`` so equal numbers give equal bytes.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from drml_iv import __version__


def config_hash(config: Mapping) -> str:
    """Short SHA-256 of the canonical JSON form of ``config``."""
    blob = json.dumps(_jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _jsonable(obj):
    if isinstance(obj, Mapping):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return repr(v) if math.isfinite(v) else ("nan" if math.isnan(v) else repr(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def meta_block(seed, config: Mapping | None = None, **extra) -> dict:
    meta = {"version": __version__, "seed": seed, "config_hash": config_hash(config or {})}
    meta.update(extra)
    return meta


def write_csv(path, rows: Iterable[Mapping], meta: Mapping, columns=None) -> Path:
    rows = list(rows)
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    buf = io.StringIO()
    for k, v in meta.items():
        buf.write(f"# {k}: {v}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(c, "")) for c in columns])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue())
    return path


def write_json(path, payload, meta: Mapping) -> Path:
    doc = {"meta": _jsonable(dict(meta)), "result": _jsonable(payload)}
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n")
    return path


def read_csv_body(path) -> str:
    """File text without the leading ``#`` provenance lines."""
    lines = Path(path).read_text().splitlines(keepends=True)
    return "".join(line for line in lines if not line.startswith("#"))
