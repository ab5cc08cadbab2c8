"""CSV and plain-PGM writers."""

from __future__ import annotations

import csv
import io as _io
import math
from pathlib import Path

import numpy as np


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def table_rows(table) -> list:
    rows = table.rows() if hasattr(table, "rows") else list(table)
    return [dict(r) for r in rows]


def csv_text(table) -> str:
    rows = table_rows(table)
    if not rows:
        raise ValueError("cannot write an empty table")
    header = list(rows[0])
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(r[k]) for k in header])
    return buf.getvalue()


def write_csv(table, path) -> Path:
    """UTF-8 CSV with a header row; floats written with 17 significant digits."""
    path = Path(path)
    path.write_text(csv_text(table), encoding="utf-8")
    return path


def gray_levels(indicator, threshold: float) -> np.ndarray:
    """255·min(1, log10(1 + v) / log10(1 + threshold)), rounded half up."""
    v = np.asarray(indicator, dtype=np.float64)
    with np.errstate(over="ignore", invalid="ignore"):
        t = np.log10(1.0 + np.where(np.isnan(v), np.inf, v)) / math.log10(1.0 + threshold)
    t = np.clip(t, 0.0, 1.0)
    return np.floor(255.0 * t + 0.5).astype(int)


def pgm_bytes(grid) -> bytes:
    g = gray_levels(grid.indicator, grid.threshold)
    h, w = g.shape
    lines = ["P2", f"{w} {h}", "255"]
    lines += [" ".join(map(str, row)) for row in g]
    return ("\n".join(lines) + "\n").encode("ascii")


def write_pgm(grid, path) -> Path:
    """Plain PGM (P2), rows top to bottom."""
    path = Path(path)
    path.write_bytes(pgm_bytes(grid))
    return path
