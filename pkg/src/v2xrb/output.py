"""Atomic CSV/JSON emission with a provenance comment line."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    return v


def csv_text(header, rows, comment: str | None = None) -> str:
    buf = io.StringIO()
    if comment:
        buf.write(f"# {comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_atomic(path, text: str) -> Path:
    """Write via a temp file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_csv(path, header, rows, comment: str | None = None) -> Path:
    return write_atomic(path, csv_text(header, rows, comment))


def write_json(path, doc) -> Path:
    return write_atomic(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_csv(path) -> tuple[list, list]:
    """Header and rows (as strings) of a CSV written by write_csv."""
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    return header, list(reader)
