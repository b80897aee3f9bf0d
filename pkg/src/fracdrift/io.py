"""Flat binary field files and CSV dumps.

Layout, all little-endian::

    int64 dims, int64 N, float64 L, int64 M, float64 Y, float64 gamma
    float64 values, row-major

A trace (no y-direction) is stored with ``M = 0``, ``Y = 0`` and
``gamma = 1``; an extended field has shape ``(M + 1,) + (N,) * dims``.
"""

from __future__ import annotations

import csv
import io
import os
import struct
from pathlib import Path

import numpy as np

from .core import ExtendedField, GradedYGrid, ScalarField, TorusGrid
from .errors import InvalidArgument

__all__ = ["HEADER", "write_field", "read_field", "field_bytes", "field_csv", "atomic_write"]

HEADER = struct.Struct("<qqdqdd")


def field_bytes(fld: ScalarField | ExtendedField) -> bytes:
    if isinstance(fld, ExtendedField):
        g, yg = fld.xgrid, fld.ygrid
        head = HEADER.pack(g.n, g.N, g.L, yg.M, yg.Y, yg.gamma)
    elif isinstance(fld, ScalarField):
        g = fld.grid
        head = HEADER.pack(g.n, g.N, g.L, 0, 0.0, 1.0)
    else:
        raise InvalidArgument(f"cannot serialize {type(fld).__name__}")
    return head + np.ascontiguousarray(fld.values, dtype="<f8").tobytes()


def atomic_write(path: str | os.PathLike, data: bytes | str) -> Path:
    """Write to a sibling temporary file, then rename over ``path``."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    mode = "wb" if isinstance(data, bytes) else "w"
    with open(tmp, mode) as fh:
        fh.write(data)
    os.replace(tmp, path)
    return path


def write_field(path: str | os.PathLike, fld: ScalarField | ExtendedField) -> Path:
    return atomic_write(path, field_bytes(fld))


def read_field(path: str | os.PathLike) -> ScalarField | ExtendedField:
    raw = Path(path).read_bytes()
    if len(raw) < HEADER.size:
        raise InvalidArgument(f"{path}: truncated header")
    dims, N, L, M, Y, gamma = HEADER.unpack_from(raw)
    grid = TorusGrid(int(dims), int(N), float(L))
    shape = ((M + 1,) if M > 0 else ()) + grid.shape
    count = int(np.prod(shape))
    body = raw[HEADER.size :]
    if len(body) != 8 * count:
        raise InvalidArgument(f"{path}: expected {count} values, found {len(body) // 8}")
    values = np.frombuffer(body, dtype="<f8").reshape(shape).astype(float)
    if M == 0:
        return ScalarField(grid, values)
    return ExtendedField(grid, GradedYGrid(Y, int(M), gamma), values)


def field_csv(fld: ScalarField | ExtendedField) -> str:
    """One row per node: coordinates, then the value (trace) or ``y`` and value."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if isinstance(fld, ScalarField):
        g = fld.grid
        coords = [c.ravel() for c in np.meshgrid(*([g.x] * g.n), indexing="ij")]
        w.writerow((["x1", "x2"] if g.n == 2 else ["x"]) + ["u"])
        for row in zip(*coords, fld.values.ravel()):
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()
    g, y = fld.xgrid, fld.ygrid.nodes
    w.writerow((["x1", "x2"] if g.n == 2 else ["x"]) + ["y", "u"])
    coords = [c.ravel() for c in np.meshgrid(*([g.x] * g.n), indexing="ij")]
    for j, yj in enumerate(y):
        for row in zip(*coords, fld.values[j].ravel()):
            w.writerow([repr(float(v)) for v in row[:-1]] + [repr(float(yj)), repr(float(row[-1]))])
    return buf.getvalue()
