"""
Field dumps: a JSON header next to a CSV node table.

Format ``thinfb-field`` version 1::

    <stem>.json  {"format": "thinfb-field", "version": 1, "grid": {n, h, halfwidth},
                  "even": bool, "nodes": int, "columns": [...], "data": "<stem>.csv",
                  ...extra keys}
    <stem>.csv   header row, then one row per node in flat (C) order:
                 index, x_1, ..., x_{n+1}, value   (values written with repr precision)
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from ..grid import ScalarField, build_grid

FORMAT = "thinfb-field"
VERSION = 1


class FieldFormatError(ValueError):
    pass


def dump_field(u: ScalarField, stem, extra: dict = None) -> tuple:
    """Write ``stem.json`` and ``stem.csv``; returns both paths."""
    stem = Path(stem)
    g = u.grid
    cols = ["index"] + [f"x{d + 1}" for d in range(g.dim)] + ["value"]
    header = {"format": FORMAT, "version": VERSION, "grid": g.params(), "even": u.even,
              "nodes": g.size, "columns": cols, "data": stem.name + ".csv"}
    if extra:
        header.update(extra)
    jpath = stem.with_name(stem.name + ".json")
    cpath = stem.with_name(stem.name + ".csv")
    pts = g.points(np.arange(g.size))
    vals = u.values.ravel()
    with open(cpath, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(cols)
        for i in range(g.size):
            w.writerow([i] + [repr(float(x)) for x in pts[i]] + [repr(float(vals[i]))])
    with open(jpath, "w", encoding="utf-8") as f:
        json.dump(header, f, indent=2, sort_keys=True)
        f.write("\n")
    return jpath, cpath


def load_field(path) -> ScalarField:
    """Read a dump given its JSON header path (or the common stem)."""
    path = Path(path)
    if path.suffix != ".json":
        path = path.with_name(path.name + ".json")
    try:
        header = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise FieldFormatError(f"cannot read field header {path}: {exc}") from exc
    if header.get("format") != FORMAT or header.get("version") != VERSION:
        raise FieldFormatError(f"{path} is not a {FORMAT} v{VERSION} header")
    gp = header["grid"]
    g = build_grid(gp["n"], gp["h"], gp["halfwidth"])
    vals = np.empty(g.size)
    seen = np.zeros(g.size, dtype=bool)
    with open(path.with_name(header["data"]), newline="", encoding="utf-8") as f:
        r = csv.reader(f)
        if next(r, None) != header["columns"]:
            raise FieldFormatError("CSV header does not match the JSON column list")
        for row in r:
            i = int(row[0])
            vals[i] = float(row[-1])
            seen[i] = True
    if not seen.all():
        raise FieldFormatError(f"{int((~seen).sum())} nodes missing from the dump")
    return ScalarField(g, vals.reshape(g.shape), bool(header["even"]))
