"""Deterministic CSV and JSON artifacts stamped with the library version and a config hash.

Every CSV file starts with two comment lines::

    # gagliardo <version> config_sha256=<hex>
    # config {"command": ..., ...}

followed by a header row. Floats are written with ``repr`` (shortest
round-trip form). Thread counts and timings never enter a file, so the bytes
depend only on the configuration.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__

__all__ = ["config_hash", "format_cell", "write_csv", "write_json"]

EXCLUDED_KEYS = ("threads",)


def _canonical(config: dict) -> str:
    clean = {k: v for k, v in config.items() if k not in EXCLUDED_KEYS}
    return json.dumps(clean, sort_keys=True, separators=(",", ":"))


def config_hash(config: dict) -> str:
    return hashlib.sha256(_canonical(config).encode("utf-8")).hexdigest()


def format_cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return " ".join(format_cell(x) for x in v)
    if hasattr(v, "item"):
        return format_cell(v.item())
    return str(v)


def write_csv(path, columns: Sequence[str], rows: Iterable[Sequence], config: dict) -> Path:
    path = Path(path)
    buf = io.StringIO()
    buf.write(f"# gagliardo {__version__} config_sha256={config_hash(config)}\n")
    buf.write(f"# config {_canonical(config)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([format_cell(v) for v in row])
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue())
    return path


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if hasattr(obj, "item"):
        return obj.item()
    return obj


def write_json(path, payload: dict, config: dict) -> Path:
    path = Path(path)
    doc = {
        "gagliardo_version": __version__,
        "config_sha256": config_hash(config),
        "config": json.loads(_canonical(config)),
        "result": _plain(payload),
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    return path
