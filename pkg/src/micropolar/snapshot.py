"""Binary snapshot files for spectral coefficients.

Layout (all little-endian)::

    offset  size  content
    0       5     magic b"MPSF1"
    5       4     uint32 n (modes per axis)
    9       8     float64 box_length
    17      4     uint32 field count (number of scalar fields)
    21      1     index order, b"C" (row-major)
    22      ...   field_count * n^3 complex coefficients, each as a
                  float64 real / float64 imag pair, row-major over
                  (field, kx, ky, kz) in FFT index order
                  (0, 1, ..., n/2-1, -n/2, ..., -1 on each axis)

A vector field occupies three consecutive scalar fields (x, y, z).
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .spectral import GridSpec, SpectralField, VectorField

MAGIC = b"MPSF1"
_HEADER = struct.Struct("<5sIdIc")


class SnapshotFormatError(ValueError):
    pass


def atomic_write_bytes(path: str | os.PathLike, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def encode_snapshot(fields) -> bytes:
    fields = list(fields)
    if not fields:
        raise ValueError("nothing to write")
    grid = fields[0].grid
    blocks = []
    for f in fields:
        if f.grid.n != grid.n or f.grid.box_length != grid.box_length:
            raise ValueError("all fields in a snapshot must share one grid")
        blocks.append(f.coeffs.reshape(-1, *grid.shape))
    data = np.concatenate(blocks).astype("<c16")
    header = _HEADER.pack(MAGIC, grid.n, float(grid.box_length), data.shape[0], b"C")
    return header + data.tobytes(order="C")


def write_snapshot(path, fields) -> None:
    atomic_write_bytes(path, encode_snapshot(fields))


def decode_snapshot(buf: bytes, dealias_fraction: float = 2.0 / 3.0) -> tuple[GridSpec, np.ndarray]:
    """Return the grid and a (field_count, n, n, n) complex array."""
    if len(buf) < _HEADER.size:
        raise SnapshotFormatError("truncated header")
    magic, n, box_length, count, order = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise SnapshotFormatError(f"bad magic {magic!r}")
    if order != b"C":
        raise SnapshotFormatError(f"unsupported index order {order!r}")
    expected = _HEADER.size + count * n**3 * 16
    if len(buf) != expected:
        raise SnapshotFormatError(f"expected {expected} bytes, found {len(buf)}")
    grid = GridSpec(n, box_length, dealias_fraction)
    data = np.frombuffer(buf, dtype="<c16", offset=_HEADER.size).reshape(count, n, n, n)
    return grid, data.astype(np.complex128)


def read_snapshot(path, dealias_fraction: float = 2.0 / 3.0) -> tuple[GridSpec, np.ndarray]:
    return decode_snapshot(Path(path).read_bytes(), dealias_fraction)


def read_vector_fields(path, dealias_fraction: float = 2.0 / 3.0) -> list[VectorField]:
    grid, data = read_snapshot(path, dealias_fraction)
    if data.shape[0] % 3:
        raise SnapshotFormatError("field count is not a multiple of 3")
    return [VectorField(grid, data[i : i + 3]) for i in range(0, data.shape[0], 3)]


def read_scalar_fields(path, dealias_fraction: float = 2.0 / 3.0) -> list[SpectralField]:
    grid, data = read_snapshot(path, dealias_fraction)
    return [SpectralField(grid, d) for d in data]
