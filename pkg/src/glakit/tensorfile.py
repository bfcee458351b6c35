"""Binary tensor files: magic "GLAT", explicit header, little-endian fp64.

Layout: 4-byte magic, u32 version (=1), u32 ndim, u32 dims[ndim],
u32 dtype code (1 = float64), then the row-major payload.  Everything is
little-endian and bit-exact across round trips, which is the whole point:
cross-language comparisons and CLI determinism tests compare raw bytes.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

__all__ = ["TensorFileError", "write_tensor", "read_tensor", "MAGIC", "VERSION", "DTYPE_F64"]

MAGIC = b"GLAT"
VERSION = 1
DTYPE_F64 = 1


class TensorFileError(Exception):
    """Malformed or truncated tensor file."""


def write_tensor(path, arr) -> None:
    a = np.ascontiguousarray(np.asarray(arr, dtype="<f8"))
    header = struct.pack("<4sII", MAGIC, VERSION, a.ndim)
    header += struct.pack(f"<{a.ndim}I", *a.shape)
    header += struct.pack("<I", DTYPE_F64)
    Path(path).write_bytes(header + a.tobytes())


def read_tensor(path) -> np.ndarray:
    p = Path(path)
    try:
        buf = p.read_bytes()
    except OSError as exc:
        raise TensorFileError(f"{p}: {exc}") from exc

    def take(fmt: str, offset: int):
        size = struct.calcsize(fmt)
        if offset + size > len(buf):
            raise TensorFileError(f"{p}: truncated header")
        return struct.unpack_from(fmt, buf, offset), offset + size

    (magic, version, ndim), off = take("<4sII", 0)
    if magic != MAGIC:
        raise TensorFileError(f"{p}: bad magic {magic!r}")
    if version != VERSION:
        raise TensorFileError(f"{p}: unsupported version {version}")
    if ndim < 1 or ndim > 8:
        raise TensorFileError(f"{p}: implausible ndim {ndim}")
    dims, off = take(f"<{ndim}I", off)
    (dtype,), off = take("<I", off)
    if dtype != DTYPE_F64:
        raise TensorFileError(f"{p}: unsupported dtype code {dtype}")
    count = 1
    for d in dims:
        count *= d
    expected = off + 8 * count
    if len(buf) != expected:
        raise TensorFileError(
            f"{p}: payload is {len(buf) - off} bytes, expected {8 * count}")
    a = np.frombuffer(buf, dtype="<f8", count=count, offset=off).reshape(dims)
    return a.copy()
