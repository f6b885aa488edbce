"""Delimited and JSON emission of experiment outputs.

Every file starts with (or embeds) the short hash of the generating
configuration, so outputs can be traced back to their scenario. Writers are
deterministic: fixed column orders, repr-based float formatting, no
timestamps. The readers round-trip everything the writers emit.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path, header: list, rows: list, config_hash: str) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# config_sha256={config_hash}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def read_csv(path) -> tuple[str, list, list]:
    """Returns (config_hash, header, rows) with numeric fields parsed."""
    path = Path(path)
    with path.open() as fh:
        first = fh.readline().strip()
        if not first.startswith("# config_sha256="):
            raise ValueError(f"{path}: missing config hash line")
        config_hash = first.split("=", 1)[1]
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[_parse(v) for v in row] for row in reader]
    return config_hash, header, rows


def _parse(text: str):
    if text == "":
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def write_json(path, header: list, rows: list, config_hash: str) -> None:
    payload = {
        "config_sha256": config_hash,
        "columns": header,
        "rows": [[None if v is None else v for v in row] for row in rows],
    }
    Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")


def read_json(path) -> tuple[str, list, list]:
    payload = json.loads(Path(path).read_text())
    return payload["config_sha256"], payload["columns"], payload["rows"]


def emit(out_dir, name: str, header: list, rows: list, config_hash: str,
         formats: tuple = ("csv",)) -> list:
    """Write one table in the requested formats; returns the paths written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if "csv" in formats:
        p = out_dir / f"{name}.csv"
        write_csv(p, header, rows, config_hash)
        written.append(p)
    if "json" in formats:
        p = out_dir / f"{name}.json"
        write_json(p, header, rows, config_hash)
        written.append(p)
    return written
