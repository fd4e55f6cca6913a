"""Deterministic JSON/CSV writers.

JSON keys are sorted and floats are written with ``repr`` precision so the same
inputs always give byte-identical files. CSV uses a header row, ``.`` decimals,
UTF-8 and LF line endings. Every writer goes through a temporary file and an
atomic rename, so a failing run never leaves a half-written output behind.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .reward import DELTA

__all__ = ["to_jsonable", "dumps_json", "write_json", "write_csv", "csv_text", "commit_files"]


def to_jsonable(obj):
    """Recursively convert numpy scalars/arrays, infinities and ``DELTA``."""
    if obj is DELTA:
        return "DELTA"
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def dumps_json(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _fmt(v) -> str:
    if v is DELTA:
        return "DELTA"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def _atomic_write(path: Path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp_", suffix=path.suffix)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, obj):
    _atomic_write(Path(path), dumps_json(obj))


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]):
    _atomic_write(Path(path), csv_text(header, rows))


def commit_files(out_dir, files: dict):
    """Write a ``{name: text}`` bundle; nothing is written unless all texts exist.

    Callers render every output to text first, so a solver failure raises
    before this function touches the disk.
    """
    out = Path(out_dir)
    for name, text in files.items():
        _atomic_write(out / name, text)
    return [str(out / n) for n in files]
