"""JSON diagnostic records and the append-only CSV experiment ledger."""

from __future__ import annotations

import csv
import fcntl
import hashlib
import io
import json
import math
from pathlib import Path

import numpy as np

from ..grid import ScalarField

LEDGER_COLUMNS = ["config_hash", "experiment", "diagnostic", "key", "value", "bound", "passed",
                  "record"]


def field_hash(u: ScalarField) -> str:
    """sha256 over grid parameters, symmetry flag and the raw value bytes."""
    h = hashlib.sha256()
    h.update(json.dumps(u.grid.params(), sort_keys=True).encode())
    h.update(b"even" if u.even else b"full")
    h.update(np.ascontiguousarray(u.values, dtype="<f8").tobytes())
    return h.hexdigest()


def jsonable(obj):
    """Recursively convert numpy scalars/arrays; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if math.isfinite(f):
            return f
        return "nan" if math.isnan(f) else ("inf" if f > 0 else "-inf")
    if hasattr(obj, "to_json"):
        return jsonable(obj.to_json())
    return obj


def make_record(diagnostic: str, inputs: dict, outputs: dict, tolerances: dict = None) -> dict:
    """Diagnostic record; fields among the inputs are replaced by their hash."""
    ins = {k: ({"field_sha256": field_hash(v)} if isinstance(v, ScalarField) else v)
           for k, v in inputs.items()}
    return jsonable({"diagnostic": diagnostic, "inputs": ins, "outputs": outputs,
                     "tolerances": tolerances or {}})


def dumps(record) -> str:
    return json.dumps(jsonable(record), indent=2, sort_keys=True) + "\n"


def append_ledger(path, rows: list) -> None:
    """Append rows (dicts keyed by LEDGER_COLUMNS) under an exclusive advisory lock."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a+", newline="", encoding="utf-8") as f:
        fcntl.flock(f.fileno(), fcntl.LOCK_EX)
        try:
            f.seek(0, io.SEEK_END)
            w = csv.DictWriter(f, fieldnames=LEDGER_COLUMNS, quoting=csv.QUOTE_MINIMAL)
            if f.tell() == 0:
                w.writeheader()
            for row in rows:
                w.writerow({k: _cell(row.get(k, "")) for k in LEDGER_COLUMNS})
            f.flush()
        finally:
            fcntl.flock(f.fileno(), fcntl.LOCK_UN)


def _cell(v) -> str:
    v = jsonable(v)
    if isinstance(v, (dict, list)):
        return json.dumps(v, sort_keys=True)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def read_ledger(path) -> tuple:
    """(good rows, list of (line number, reason)) from a ledger file."""
    good, bad = [], []
    with open(path, newline="", encoding="utf-8") as f:
        r = csv.reader(f)
        header = next(r, None)
        if header is None:
            return good, bad
        if header != LEDGER_COLUMNS:
            return good, [(1, "unexpected header")]
        for lineno, row in enumerate(r, start=2):
            if len(row) != len(LEDGER_COLUMNS):
                bad.append((lineno, f"expected {len(LEDGER_COLUMNS)} fields, got {len(row)}"))
                continue
            good.append(dict(zip(LEDGER_COLUMNS, row)))
    return good, bad
