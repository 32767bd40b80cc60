"""CSV and JSON artifact writers with a provenance header block.

Every file starts with ``# key: value`` comment lines carrying at least the
config hash, seed, and package version.  Numeric cells use shortest
round-trip decimal form; missing values are empty cells, never zeros.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

__all__ = ["fmt", "write_table", "read_table", "write_json", "read_json"]


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_table(path: str | Path, meta: dict, columns: list[str],
                rows) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        for key in sorted(meta):
            fh.write(f"# {key}: {meta[key]}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def read_table(path: str | Path):
    """Returns (meta, columns, rows-as-string-lists)."""
    path = Path(path)
    meta: dict[str, str] = {}
    rows: list[list[str]] = []
    columns: list[str] = []
    with path.open(newline="") as fh:
        header_done = False
        reader = csv.reader(fh)
        for row in reader:
            if not row:
                continue
            if not header_done and row[0].startswith("# "):
                key, _, value = row[0][2:].partition(": ")
                meta[key] = value
                continue
            if not header_done:
                columns = row
                header_done = True
                continue
            rows.append(row)
    return meta, columns, rows


def write_json(path: str | Path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_json(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())
