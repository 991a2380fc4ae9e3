"""CSV and JSON writers with 17 significant digits for every float.

Output is deterministic: keys keep insertion order, no timestamps are
written, and floats are printed with ``%.17g`` so reruns are byte-identical
and values round-trip exactly.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .grid import Grid


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def _json_value(obj: Any, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return "null"
        text = f"{x:.17g}"
        # keep floats typed as floats for JSON readers
        return text if any(c in text for c in ".en") else text + ".0"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_json_value(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(_json_value(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _json_value(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps_json(obj: Any, indent: int = 2) -> str:
    """JSON text with floats at 17 significant digits; NaN and inf become null."""
    return _json_value(obj, indent, 0) + "\n"


def write_json(path, obj: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_json(obj), encoding="utf-8")
    return path


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) for x in row])
    return path


def write_columns(path, columns: dict[str, Sequence]) -> Path:
    names = list(columns)
    return write_csv(path, names, zip(*(columns[k] for k in names)))


SERIES_COLUMNS = ("t", "S", "mass_error", "min_v", "linf_v", "W11_norm", "s_equation_drift")


def write_trajectory(out_dir, traj, grid: Grid, prefix: str = "") -> dict[str, Path]:
    """``fields.csv`` (t, x, v) from the snapshots and ``series.csv`` from the per-step diagnostics."""
    out_dir = Path(out_dir)
    x = grid.centers
    rows = ((s.t, xi, vi) for s in traj.snapshots for xi, vi in zip(x, s.v))
    fields = write_csv(out_dir / f"{prefix}fields.csv", ("t", "x", "v"), rows)
    d = traj.diagnostics
    series = write_columns(out_dir / f"{prefix}series.csv", {k: d[k] for k in SERIES_COLUMNS})
    return {"fields": fields, "series": series}


def read_csv(path) -> dict[str, np.ndarray]:
    """Read a numeric CSV written by :func:`write_csv` into columns."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r)
        data = [[float(x) if x not in ("true", "false") else float(x == "true") for x in row] for row in r]
    arr = np.array(data, dtype=float).reshape(-1, len(header))
    return {h: arr[:, i] for i, h in enumerate(header)}
