"""Dense vectors and matrices on flat 64-bit float buffers.

Storage is ``array('d')`` so both kernel backends (compiled and pure
Python) operate on the same memory through the buffer protocol.  Matrices
are row-major.  The module-level operations are pure: inputs are never
mutated and results are freshly allocated.
"""

from __future__ import annotations

from array import array
from typing import Iterable, Sequence

from . import _backend
from .errors import DimensionError


def new_buffer(n: int) -> array:
    """Zero-filled float64 buffer of length ``n``."""
    return array("d", bytes(8 * n))


class Vector:
    """Dense float64 vector."""

    __slots__ = ("data",)

    def __init__(self, data: array):
        if not isinstance(data, array) or data.typecode != "d":
            raise TypeError("Vector wraps an array('d') buffer")
        if len(data) == 0:
            raise DimensionError("vector dimension must be positive")
        self.data = data

    @classmethod
    def of(cls, values: Iterable[float]) -> "Vector":
        return cls(array("d", [float(v) for v in values]))

    @classmethod
    def zeros(cls, n: int) -> "Vector":
        if n <= 0:
            raise DimensionError(f"vector dimension must be positive, got {n}")
        return cls(new_buffer(n))

    @property
    def dim(self) -> int:
        return len(self.data)

    def copy(self) -> "Vector":
        return Vector(array("d", self.data))

    def tolist(self) -> list[float]:
        return list(self.data)

    def __len__(self) -> int:
        return len(self.data)

    def __getitem__(self, i: int) -> float:
        return self.data[i]

    def __iter__(self):
        return iter(self.data)

    def __repr__(self) -> str:
        return f"Vector({self.tolist()!r})"


class Matrix:
    """Dense row-major float64 matrix."""

    __slots__ = ("rows", "cols", "data")

    def __init__(self, rows: int, cols: int, data: array):
        if rows <= 0 or cols <= 0:
            raise DimensionError(f"matrix shape must be positive, got {rows}x{cols}")
        if not isinstance(data, array) or data.typecode != "d":
            raise TypeError("Matrix wraps an array('d') buffer")
        if len(data) != rows * cols:
            raise DimensionError(
                f"matrix buffer holds {len(data)} entries, shape {rows}x{cols} "
                f"needs {rows * cols}"
            )
        self.rows = rows
        self.cols = cols
        self.data = data

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "Matrix":
        if rows <= 0 or cols <= 0:
            raise DimensionError(f"matrix shape must be positive, got {rows}x{cols}")
        return cls(rows, cols, new_buffer(rows * cols))

    @classmethod
    def identity(cls, n: int) -> "Matrix":
        m = cls.zeros(n, n)
        for i in range(n):
            m.data[i * n + i] = 1.0
        return m

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]]) -> "Matrix":
        r = len(rows)
        if r == 0:
            raise DimensionError("matrix needs at least one row")
        c = len(rows[0])
        flat = array("d")
        for row in rows:
            if len(row) != c:
                raise DimensionError(
                    f"ragged rows: expected {c} columns, got {len(row)}"
                )
            flat.extend(float(v) for v in row)
        return cls(r, c, flat)

    def copy(self) -> "Matrix":
        return Matrix(self.rows, self.cols, array("d", self.data))

    def row(self, i: int) -> Vector:
        return Vector(array("d", self.data[i * self.cols:(i + 1) * self.cols]))

    def tolists(self) -> list[list[float]]:
        c = self.cols
        return [list(self.data[i * c:(i + 1) * c]) for i in range(self.rows)]

    def __getitem__(self, ij: tuple[int, int]) -> float:
        i, j = ij
        return self.data[i * self.cols + j]

    def __repr__(self) -> str:
        return f"Matrix({self.rows}x{self.cols})"


def matvec(m: Matrix, v: Vector) -> Vector:
    if m.cols != v.dim:
        raise DimensionError(
            f"matvec: matrix is {m.rows}x{m.cols}, vector has dim {v.dim}"
        )
    out = Vector.zeros(m.rows)
    _backend.kernels.matvec_into(out.data, m.data, m.rows, m.cols, v.data)
    return out


def matvec_t(m: Matrix, v: Vector) -> Vector:
    """Transpose product ``m^T v``."""
    if m.rows != v.dim:
        raise DimensionError(
            f"matvec_t: matrix is {m.rows}x{m.cols}, vector has dim {v.dim}"
        )
    out = Vector.zeros(m.cols)
    _backend.kernels.matvec_t_into(out.data, m.data, m.rows, m.cols, v.data)
    return out


def axpy(alpha: float, x: Vector, y: Vector) -> Vector:
    """alpha*x + y."""
    if x.dim != y.dim:
        raise DimensionError(f"axpy: x has dim {x.dim}, y has dim {y.dim}")
    out = Vector.zeros(x.dim)
    _backend.kernels.axpy_into(out.data, alpha, x.data, y.data)
    return out


def outer(a: Vector, b: Vector) -> Matrix:
    out = Matrix.zeros(a.dim, b.dim)
    _backend.kernels.outer_acc(out.data, a.dim, b.dim, 1.0, a.data, b.data)
    return out


def norm2(v: Vector) -> float:
    return _backend.kernels.nrm2(v.data)


def dot(x: Vector, y: Vector) -> float:
    if x.dim != y.dim:
        raise DimensionError(f"dot: x has dim {x.dim}, y has dim {y.dim}")
    return _backend.kernels.dot(x.data, y.data)
