"""CSV and JSON artifacts stamped with the config hash and seed that produced them."""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass
from pathlib import Path


@dataclass(frozen=True)
class CsvTable:
    stamp: dict  # key=value pairs of the leading comment line
    header: list[str]
    rows: list[dict]

    def column(self, name: str, cast=float) -> list:
        return [cast(r[name]) for r in self.rows]


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path, header, rows, config_hash: str, seed: int) -> None:
    buf = io.StringIO()
    buf.write(f"# config={config_hash} seed={seed}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    _atomic_write(Path(path), buf.getvalue())


def read_stamp(path) -> dict | None:
    path = Path(path)
    if not path.exists():
        return None
    with open(path) as fh:
        first = fh.readline()
    if not first.startswith("#"):
        return None
    return dict(item.split("=", 1) for item in first[1:].split() if "=" in item)


def read_csv(path) -> CsvTable:
    with open(path, newline="") as fh:
        first = fh.readline()
        stamp = dict(item.split("=", 1) for item in first[1:].split() if "=" in item)
        reader = csv.DictReader(fh)
        rows = list(reader)
    return CsvTable(stamp, list(reader.fieldnames or []), rows)


def write_json(path, data: dict) -> None:
    _atomic_write(Path(path), json.dumps(data, indent=2, sort_keys=True) + "\n")
