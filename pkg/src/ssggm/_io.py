"""Atomic writers for CSV, JSON and text outputs."""
from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path
from typing import Optional

import numpy as np


def write_text_atomic(path, text: str) -> None:
    """Write via a temporary file in the same directory followed by a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv_atomic(path, arr, fmt: str = "%.17g", manifest: Optional[str] = None,
                     header: Optional[str] = None) -> None:
    """Headerless comma-separated matrix; a ``# manifest=<id>`` comment line leads when given."""
    arr = np.asarray(arr)
    if arr.ndim == 1:
        arr = arr[None, :] if arr.size else arr.reshape(0, 0)
    lines = []
    if manifest is not None:
        lines.append(f"# manifest={manifest}")
    if header is not None:
        lines.append(f"# {header}")
    for row in arr:
        lines.append(",".join(fmt % v for v in row))
    write_text_atomic(path, "\n".join(lines) + "\n")


def read_manifest_id(path) -> Optional[str]:
    with open(path) as fh:
        first = fh.readline().strip()
    return first.split("=", 1)[1] if first.startswith("# manifest=") else None


def jsonable(obj):
    """Recursively convert numpy scalars and arrays; non-finite floats become ``None``."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json_atomic(path, obj) -> None:
    write_text_atomic(path, json.dumps(jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n")
