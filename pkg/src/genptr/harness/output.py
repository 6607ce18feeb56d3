"""Result serialisation: CSV or JSON, floats at 12 significant digits."""

from __future__ import annotations

import csv
import io
import json
import math
import sys

__all__ = ["format_value", "emit_results", "render_results"]


def format_value(v):
    """Cell text for CSV; ``None`` becomes an empty cell."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".12g")
    return str(v)


def _json_value(v):
    if isinstance(v, float):
        return float(format(v, ".12g")) if math.isfinite(v) else None
    return v


def render_results(rows, fmt: str = "csv", columns=None) -> str:
    if columns is None:
        columns = list(rows[0]) if rows else []
    for r in rows:
        if list(r) != list(columns):
            raise ValueError(f"row keys {list(r)} do not match the schema {list(columns)}")
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([format_value(r[c]) for c in columns])
        return buf.getvalue()
    if fmt == "json":
        return json.dumps([{c: _json_value(r[c]) for c in columns} for r in rows], indent=1) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def emit_results(rows, path=None, fmt: str = "csv", columns=None) -> None:
    """Write ``rows`` to ``path`` (stdout when None) as UTF-8 with LF line endings."""
    text = render_results(rows, fmt, columns)
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
