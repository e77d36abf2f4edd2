"""Bit-exact binary tensor container ("SARA" format).

Layout, little-endian throughout:

    magic   4 bytes  b"SARA"
    version u8       1
    dtype   u8       1 = float32
    ndim    u8
    pad     u8       0
    dims    ndim x u32, outermost first
    data    row-major float32 payload

Probability maps are written with ndim=2; feature maps and pooled grids with
ndim=3 (channel first).
"""

from __future__ import annotations

import struct
from typing import BinaryIO

import numpy as np

from .errors import BadMagicError, TruncatedStreamError, UnsupportedVersionError
from .tensors import FeatureMap, PooledGrid, ProbMap

MAGIC = b"SARA"
VERSION = 1
DTYPE_F32 = 1


def _payload(t) -> np.ndarray:
    if isinstance(t, (FeatureMap, ProbMap, PooledGrid)):
        arr = t.data
    else:
        arr = np.asarray(t)
    if arr.dtype != np.float32:
        raise ValueError(f"only float32 tensors are serializable, got {arr.dtype}")
    return arr


def tensor_bytes(t) -> bytes:
    """Serialize a tensor to SARA container bytes."""
    arr = _payload(t)
    if arr.ndim == 0 or arr.size == 0:
        raise ValueError("cannot serialize a tensor with empty dims")
    arr = np.ascontiguousarray(arr)
    header = MAGIC + struct.pack("<BBBB", VERSION, DTYPE_F32, arr.ndim, 0)
    dims = struct.pack(f"<{arr.ndim}I", *arr.shape)
    return header + dims + arr.astype("<f4", copy=False).tobytes()


def tensor_write(t, sink: BinaryIO) -> int:
    """Write a tensor to a binary sink; returns the number of bytes written."""
    blob = tensor_bytes(t)
    sink.write(blob)
    return len(blob)


def _read_exact(source: BinaryIO, n: int, what: str) -> bytes:
    buf = source.read(n)
    if buf is None or len(buf) != n:
        raise TruncatedStreamError(f"stream ended while reading {what} ({len(buf or b'')}/{n} bytes)")
    return buf


def tensor_read(source: BinaryIO) -> np.ndarray:
    """Read one SARA container; returns a read-only float32 array shaped per its dims.

    Inverse of tensor_write: read(write(t)) reproduces t's dims and bits exactly.
    """
    magic = _read_exact(source, 4, "magic")
    if magic != MAGIC:
        raise BadMagicError(f"expected {MAGIC!r}, got {magic!r}")
    version, dtype, ndim, pad = struct.unpack("<BBBB", _read_exact(source, 4, "header"))
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported container version {version}")
    if dtype != DTYPE_F32:
        raise UnsupportedVersionError(f"unsupported element type code {dtype}")
    if pad != 0:
        raise UnsupportedVersionError(f"nonzero header pad byte {pad}")
    if ndim == 0:
        raise UnsupportedVersionError("tensor rank 0 is not supported")
    dims = struct.unpack(f"<{ndim}I", _read_exact(source, 4 * ndim, "dims"))
    if min(dims) == 0:
        raise UnsupportedVersionError(f"zero-sized dimension in {dims}")
    count = int(np.prod(dims))
    raw = _read_exact(source, 4 * count, "data")
    arr = np.frombuffer(raw, dtype="<f4").astype(np.float32).reshape(dims)
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


def write_tensor_file(path, t) -> int:
    with open(path, "wb") as fh:
        return tensor_write(t, fh)


def read_tensor_file(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return tensor_read(fh)
