"""
SBMX v1 matrix files.

Layout (little-endian): magic ``SBMX`` (4 bytes), version u16 = 1, dtype
u8 = 0 (float64), reserved u8 = 0, rows u64, cols u64, then rows·cols
float64 values in row-major order.
"""

import struct
from pathlib import Path

import numpy as np

from modules.numerics.exceptions import MatrixFormatError, ShapeError

MAGIC = b"SBMX"
VERSION = 1
DTYPE_F64 = 0
HEADER = struct.Struct("<4sHBBQQ")


class MatrixStore:
    """Read and write SBMX files."""

    @staticmethod
    def to_bytes(matrix):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim == 1:
            matrix = matrix.reshape(-1, 1)
        if matrix.ndim != 2:
            raise ShapeError(f"only 2-D matrices can be stored, got {matrix.shape}")
        rows, cols = matrix.shape
        header = HEADER.pack(MAGIC, VERSION, DTYPE_F64, 0, rows, cols)
        return header + np.ascontiguousarray(matrix, dtype="<f8").tobytes()

    @staticmethod
    def from_bytes(payload):
        if len(payload) < HEADER.size:
            raise MatrixFormatError("file shorter than the SBMX header")
        magic, version, dtype, reserved, rows, cols = HEADER.unpack_from(payload)
        if magic != MAGIC:
            raise MatrixFormatError(f"bad magic {magic!r}")
        if version != VERSION:
            raise MatrixFormatError(f"unsupported SBMX version {version}")
        if dtype != DTYPE_F64:
            raise MatrixFormatError(f"unsupported dtype code {dtype}")
        if reserved != 0:
            raise MatrixFormatError("reserved header byte must be 0")
        expected = HEADER.size + rows * cols * 8
        if len(payload) != expected:
            raise MatrixFormatError(
                f"payload is {len(payload)} bytes, header promises {expected}"
            )
        values = np.frombuffer(payload, dtype="<f8", offset=HEADER.size)
        return values.astype(np.float64).reshape(rows, cols)

    @staticmethod
    def save(path, matrix):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(MatrixStore.to_bytes(matrix))
        return path

    @staticmethod
    def load(path):
        return MatrixStore.from_bytes(Path(path).read_bytes())

    @staticmethod
    def load_vector(path):
        matrix = MatrixStore.load(path)
        if matrix.shape[1] != 1:
            raise MatrixFormatError(f"{path} holds {matrix.shape}, expected a column")
        return matrix[:, 0].copy()
