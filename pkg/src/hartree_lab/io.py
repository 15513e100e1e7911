"""On-disk formats: HSF1 field files, diagnostics CSV and JSON reports."""
from __future__ import annotations

import csv
import dataclasses
import json
import math
import struct
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from .grid import Field, GridSpec, make_grid
from .observables import CSV_COLUMNS, DiagnosticsRow

MAGIC = b"HSF1"
_HEADER = struct.Struct("<4sqqdd")


def write_field(path, f: Field) -> Path:
    """Header ``HSF1, n, N (int64), L, t (float64)``, then complex128 samples, last axis fastest."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    g = f.grid
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, g.n, g.N, float(g.L), float(f.t)))
        fh.write(np.ascontiguousarray(f.values, dtype="<c16").tobytes())
    return path


def read_field(path) -> Field:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, n, N, L, t = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    g = make_grid(int(n), int(N), float(L))
    want = g.size * 16
    body = data[_HEADER.size:]
    if len(body) != want:
        raise ValueError(f"{path}: expected {want} bytes of samples, found {len(body)}")
    return Field(g, np.frombuffer(body, dtype="<c16").reshape(g.shape).astype(complex), float(t))


def write_diagnostics(path, rows: Iterable[DiagnosticsRow]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([repr(float(v)) for v in r.csv_values()])
    return path


def read_diagnostics(path) -> dict:
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        cols = [[] for _ in header]
        for line in rd:
            for c, v in zip(cols, line):
                c.append(float(v))
    return {h: np.array(c) for h, c in zip(header, cols)}


def to_jsonable(obj: Any, field_dir: Path | None = None, name: str = "field") -> Any:
    """Plain JSON structure for reports; fields are written next to the report and referenced."""
    if isinstance(obj, Field):
        if field_dir is None:
            return {"grid": dataclasses.asdict(obj.grid), "t": obj.t}
        p = write_field(Path(field_dir) / f"{name}.hsf", obj)
        return {"file": str(Path(p.parent.name) / p.name), "t": obj.t}
    if isinstance(obj, GridSpec):
        return dataclasses.asdict(obj)
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        out = {}
        for f in dataclasses.fields(obj):
            if f.name.startswith("_"):
                continue
            out[f.name] = to_jsonable(getattr(obj, f.name), field_dir, f"{name}_{f.name}" if name != "field"
                                      else f.name)
        return out
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v, field_dir, str(k) if name == "field" else f"{name}_{k}")
                for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v, field_dir, f"{name}_{i}") for i, v in enumerate(obj)]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if obj is None or isinstance(obj, str):
        return obj
    if callable(obj):
        return getattr(obj, "__name__", "callable")
    return str(obj)


def write_json(path, obj: Any, field_dir: Path | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = to_jsonable(obj, field_dir)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path
