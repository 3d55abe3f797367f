"""Report serialization: JSON reports and whitespace-separated column tables."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

FMT = "%.17g"


def _clean(obj):
    """JSON-safe copy: numpy scalars and arrays to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def dumps(report: dict) -> str:
    return json.dumps(_clean(report), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_json(path, report: dict) -> Path:
    path = Path(path)
    path.write_text(dumps(report))
    return path


def table(columns, rows) -> dict:
    return {"columns": list(columns), "rows": [[float(x) if x is not None else float("nan") for x in r] for r in rows]}


def write_table(path, columns, rows) -> Path:
    path = Path(path)
    lines = ["# " + " ".join(columns)]
    for r in rows:
        lines.append(" ".join(FMT % (np.nan if x is None else float(x)) for x in r))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_table(path):
    """Inverse of :func:`write_table`: ``(columns, rows)`` with float entries."""
    text = Path(path).read_text().splitlines()
    columns = text[0].lstrip("#").split()
    rows = [[float(x) for x in line.split()] for line in text[1:] if line.strip()]
    return columns, rows


def emit_plot_data(report: dict, out_dir) -> list[Path]:
    """Write every table in ``report["tables"]`` as ``<name>.dat`` under ``out_dir``.

    Pipelines put ``d(s)``/``W(s)`` samples, bound sweeps, moments and ratios
    into that mapping; a multi-arm report carries one table per arm plus a
    total table.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name in sorted(report.get("tables", {})):
        t = report["tables"][name]
        written.append(write_table(out_dir / f"{name}.dat", t["columns"], t["rows"]))
    return written
