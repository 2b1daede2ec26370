"""CSV and JSON emission with byte-stable float formatting."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Dict, Iterable, Mapping, Sequence

import numpy as np

FLOAT_FMT = "{:.10g}"


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return FLOAT_FMT.format(v)
    return str(v)


def write_csv(path, header: Sequence[str], columns: Iterable, comments: Sequence[str] = ()) -> Path:
    """Write equal-length ``columns`` under ``header`` (RFC 4180, LF endings).

    ``comments`` are not part of RFC 4180 and are therefore not written into
    the file; pass provenance through the summary instead.
    """
    cols = [np.asarray(c) for c in columns]
    if len(cols) != len(header):
        raise ValueError("one column per header entry is required")
    n = {len(c) for c in cols}
    if len(n) > 1:
        raise ValueError("columns differ in length")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([_fmt(v) for v in row])
    return path


def read_csv(path) -> Dict[str, np.ndarray]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    out = {}
    for i, name in enumerate(header):
        vals = [r[i] for r in body]
        try:
            out[name] = np.array([float(v) for v in vals])
        except ValueError:
            out[name] = np.array(vals)
    return out


def _jsonable(obj):
    if isinstance(obj, Mapping):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return float(FLOAT_FMT.format(v)) if math.isfinite(v) else None
    return obj


def write_summary(path, summary: Mapping) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
    return path
