"""Field dumps and CSV tables.

Binary layout (little endian): ``b"KSPDE1"``, ``Nx:u32``, ``Nv:u32``,
``Lx:f64``, ``Lv:f64``, then ``Nx*Nv`` float64 values in x-major order.
"""
from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .grid import Field, PhaseGrid

MAGIC = b"KSPDE1"
_HEADER = struct.Struct("<6sIIdd")


def write_field(path, field: Field) -> None:
    g = field.grid
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, g.Nx, g.Nv, g.Lx, g.Lv))
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def read_field(path) -> Field:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, nx, nv, lx, lv = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    body = data[_HEADER.size:]
    if len(body) != 8 * nx * nv:
        raise ValueError(f"{path}: expected {nx * nv} values, found {len(body) // 8}")
    values = np.frombuffer(body, dtype="<f8").reshape(nx, nv).astype(float)
    return Field(PhaseGrid(lx, lv, nx, nv), values)


def field_to_csv(path, field: Field) -> None:
    X, V = field.grid.mesh
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "v", "value"])
        for x, v, u in zip(X.ravel(), V.ravel(), field.values.ravel()):
            w.writerow([repr(float(x)), repr(float(v)), repr(float(u))])


def write_table(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(c)) if isinstance(c, (float, np.floating)) else c for c in row])


def read_table(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]
