"""CSV and JSON writers with a fixed, versioned, round-trip exact format.

Every file starts with a schema line (CSV) or carries a ``schema_version``
field (JSON); floats are written with 17 significant digits and lines end
with LF, so reruns with the same inputs are byte identical.
"""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

SCHEMA_VERSION = "cknlab/1"


def format_value(v: Any) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return "%.17g" % v
    if v is None:
        return ""
    return str(v)


def csv_text(columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    lines = ["# schema_version=" + SCHEMA_VERSION, ",".join(columns)]
    for row in rows:
        if len(row) != len(columns):
            raise ValueError("row has %d entries, expected %d" % (len(row), len(columns)))
        cells = [format_value(v) for v in row]
        for c in cells:
            if "," in c or "\n" in c:
                raise ValueError("CSV cells may not contain commas or newlines: %r" % c)
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def write_csv(path, columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(csv_text(columns, rows))
    return path


def read_csv(path) -> list:
    """Rows of a file written by :func:`write_csv` as dicts of strings."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if not ln.startswith("#")]
    header = lines[0].split(",")
    return [dict(zip(header, ln.split(","))) for ln in lines[1:] if ln]


def _plain(obj: Any) -> Any:
    """Convert numpy scalars/arrays and tuples to JSON-ready values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else format_value(v)
    return obj


def _dump(obj: Any, indent: int) -> str:
    pad = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = ["%s%s: %s" % (pad, json.dumps(k), _dump(v, indent + 1)) for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + "  " * indent + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(_dump(v, indent) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _dump(v, indent + 1) for v in obj) + "\n" + "  " * indent + "]"
    if isinstance(obj, float):
        return "%.17g" % obj
    return json.dumps(obj)


def json_text(document: dict) -> str:
    doc = {"schema_version": SCHEMA_VERSION}
    doc.update(_plain(document))
    return _dump(doc, 0) + "\n"


def write_json(path, document: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(json_text(document))
    return path
