"""Binary file formats for feature matrices, label vectors, and tensor sets.

All integers are little-endian. Layouts:

* feature matrix (magic ``SADV``): u32 version=1, u64 rows, u64 cols,
  then rows*cols float32 values, row-major.
* label vector (magic ``SADL``): u32 version=1, u64 count, then count u32.
* tensor container (magic ``SADM`` for model checkpoints, ``SADC`` for
  predictor checkpoints): u32 version=1, u64 tensor count, then per tensor
  u32 name length, UTF-8 name, u32 ndim, ndim u64 dims, float32 payload.

Writes are pure functions of their inputs, so re-writing the same object
yields byte-identical files.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import ArgumentError, DataError, FormatError, TruncatedFileError

FEATURE_MAGIC = b"SADV"
LABEL_MAGIC = b"SADL"
MODEL_MAGIC = b"SADM"
PREDICTOR_MAGIC = b"SADC"
VERSION = 1

_F4 = np.dtype("<f4")
_U4 = np.dtype("<u4")


class _Reader:
    def __init__(self, buf: bytes, path):
        self.buf = buf
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise TruncatedFileError(
                f"{self.path}: needed {n} bytes at offset {self.pos}, "
                f"file has {len(self.buf)}"
            )
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def array(self, dtype: np.dtype, count: int) -> np.ndarray:
        raw = self.take(dtype.itemsize * count)
        return np.frombuffer(raw, dtype=dtype, count=count).copy()

    def expect_header(self, magic: bytes) -> None:
        got = self.take(4)
        if got != magic:
            raise FormatError(f"{self.path}: bad magic {got!r}, expected {magic!r}")
        version = self.u32()
        if version != VERSION:
            raise FormatError(f"{self.path}: unsupported version {version}")

    def done(self) -> None:
        if self.pos != len(self.buf):
            raise FormatError(
                f"{self.path}: {len(self.buf) - self.pos} trailing bytes after payload"
            )


def _read_bytes(path) -> bytes:
    return Path(path).read_bytes()


# ---------------------------------------------------------------------------
# Feature matrices
# ---------------------------------------------------------------------------

def write_feature_matrix(matrix: np.ndarray, path) -> None:
    """Write a 2-D float32 matrix. Rejects non-finite values before writing."""
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise ArgumentError(f"feature matrix must be 2-D, got shape {matrix.shape}")
    if matrix.dtype != np.float32:
        raise ArgumentError(f"feature matrix must be float32, got {matrix.dtype}")
    if not np.isfinite(matrix).all():
        raise DataError("feature matrix contains non-finite values; nothing written")
    rows, cols = matrix.shape
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(struct.pack("<IQQ", VERSION, rows, cols))
        fh.write(np.ascontiguousarray(matrix, dtype=_F4).tobytes())


def read_feature_matrix(path) -> np.ndarray:
    reader = _Reader(_read_bytes(path), path)
    reader.expect_header(FEATURE_MAGIC)
    rows = reader.u64()
    cols = reader.u64()
    data = reader.array(_F4, rows * cols)
    reader.done()
    matrix = data.reshape(rows, cols).astype(np.float32, copy=False)
    if not np.isfinite(matrix).all():
        raise DataError(f"{path}: feature matrix contains non-finite values")
    return matrix


# ---------------------------------------------------------------------------
# Label vectors
# ---------------------------------------------------------------------------

def write_labels(labels: np.ndarray, path) -> None:
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ArgumentError(f"labels must be 1-D, got shape {labels.shape}")
    if not np.issubdtype(labels.dtype, np.integer):
        raise ArgumentError(f"labels must be integers, got {labels.dtype}")
    if labels.size and (labels.min() < 0 or labels.max() > np.iinfo(np.uint32).max):
        raise DataError("labels out of uint32 range")
    with open(path, "wb") as fh:
        fh.write(LABEL_MAGIC)
        fh.write(struct.pack("<IQ", VERSION, labels.size))
        fh.write(labels.astype(_U4).tobytes())


def read_labels(path) -> np.ndarray:
    reader = _Reader(_read_bytes(path), path)
    reader.expect_header(LABEL_MAGIC)
    count = reader.u64()
    labels = reader.array(_U4, count)
    reader.done()
    return labels.astype(np.uint32, copy=False)


# ---------------------------------------------------------------------------
# Named tensor containers (model / predictor checkpoints)
# ---------------------------------------------------------------------------

def write_tensor_container(entries, path, magic: bytes) -> None:
    """Write an ordered sequence of (name, float32 array) pairs."""
    entries = list(entries)
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(struct.pack("<IQ", VERSION, len(entries)))
        for name, tensor in entries:
            tensor = np.asarray(tensor)
            if tensor.dtype != np.float32:
                raise ArgumentError(f"tensor {name!r} must be float32, got {tensor.dtype}")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<I", tensor.ndim))
            for dim in tensor.shape:
                fh.write(struct.pack("<Q", dim))
            fh.write(np.ascontiguousarray(tensor, dtype=_F4).tobytes())


def read_tensor_container(path, magic: bytes) -> dict[str, np.ndarray]:
    """Read back a container written by :func:`write_tensor_container`."""
    reader = _Reader(_read_bytes(path), path)
    reader.expect_header(magic)
    count = reader.u64()
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        name_len = reader.u32()
        name = reader.take(name_len).decode("utf-8")
        ndim = reader.u32()
        shape = tuple(reader.u64() for _ in range(ndim))
        size = 1
        for dim in shape:
            size *= dim
        data = reader.array(_F4, size).reshape(shape)
        if name in out:
            raise FormatError(f"{path}: duplicate tensor name {name!r}")
        out[name] = data.astype(np.float32, copy=False)
    reader.done()
    return out
