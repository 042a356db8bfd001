"""RDMOR1 binary matrix files.

Layout (little-endian): magic ``b"RDMOR1"``, ``u16`` version, ``u64`` rows,
``u64`` cols, then ``rows * cols`` float64 values in column-major order,
then ``cols`` float64 time stamps.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import DimensionError, RdmorError

MAGIC = b"RDMOR1"
VERSION = 1
_HEADER = struct.Struct("<6sHQQ")

__all__ = ["MAGIC", "VERSION", "write_matrix", "read_matrix", "FormatError"]


class FormatError(RdmorError, ValueError):
    """File is not a readable RDMOR1 matrix."""


def write_matrix(path, M, times=None) -> Path:
    M = np.asarray(M, dtype="<f8")
    if M.ndim == 1:
        M = M[:, None]
    if M.ndim != 2:
        raise DimensionError(f"expected a 2D matrix, got {M.ndim}D")
    rows, cols = M.shape
    times = np.zeros(cols) if times is None else np.asarray(times, dtype="<f8")
    if times.shape != (cols,):
        raise DimensionError(f"need {cols} time stamps, got {times.shape}")
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, rows, cols))
        # column-major payload; ``M.T`` in C order is ``M`` in Fortran order
        fh.write(np.ascontiguousarray(M.T).tobytes())
        fh.write(np.ascontiguousarray(times).tobytes())
    return path


def read_matrix(path, mmap: bool = False):
    """Return ``(M, times)``; ``mmap=True`` maps the payload read-only."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
    if len(head) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, rows, cols = _HEADER.unpack(head)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    expected = _HEADER.size + 8 * (rows * cols + cols)
    if path.stat().st_size != expected:
        raise FormatError(f"{path}: size {path.stat().st_size} does not match header ({expected})")
    if mmap:
        data = np.memmap(path, dtype="<f8", mode="r", offset=_HEADER.size, shape=(cols, rows))
        M = data.T
    else:
        raw = np.fromfile(path, dtype="<f8", offset=_HEADER.size, count=rows * cols)
        M = raw.reshape(cols, rows).T
    times = np.fromfile(path, dtype="<f8", offset=_HEADER.size + 8 * rows * cols, count=cols)
    return M, times
