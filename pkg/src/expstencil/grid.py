"""Structured grid geometry, field storage, and the shared linear indexing scheme.

The physical domain is the unit cube [0,1]^3 with interior-only unknowns:
an axis with ``n`` interior points has spacing ``1/(n+1)`` and physical
coordinates ``(i+1)/(n+1)`` for ``i = 0..n-1``.  Fields store their values in
a flat array with x fastest: ``i = ix + nx*(iy + ny*iz)``, i.e. the C-order
index of a ``(nz, ny, nx)`` view.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import EvaluationError, GridMismatchError

SCALAR_KINDS = {
    "f32": np.dtype("<f4"),
    "f64": np.dtype("<f8"),
    "c128": np.dtype("<c16"),
}
_KIND_CODES = {"f32": 0, "f64": 1, "c128": 2}
_CODE_KINDS = {v: k for k, v in _KIND_CODES.items()}


def kind_of(values: np.ndarray) -> str:
    """Scalar-kind tag ('f32', 'f64', 'c128') of an array."""
    for kind, dt in SCALAR_KINDS.items():
        if values.dtype == dt:
            return kind
    raise TypeError(f"unsupported scalar dtype {values.dtype}")


@dataclass(frozen=True)
class Grid3D:
    """Interior point counts of a structured grid on the unit cube.

    Spacing is per-axis, ``1/(n+1)``; all axes share one spacing exactly when
    the counts agree.  Axes with a single point are treated as invariant
    directions (no second-difference term), so degenerate grids such as
    ``(n, 1, 1)`` behave as lower-dimensional problems.
    """

    nx: int
    ny: int
    nz: int

    def __post_init__(self):
        for name in ("nx", "ny", "nz"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")

    @property
    def n(self) -> int:
        return self.nx * self.ny * self.nz

    @property
    def shape(self) -> tuple[int, int, int]:
        """(nz, ny, nx): C-order view shape matching the linear indexing."""
        return (self.nz, self.ny, self.nx)

    @property
    def dx(self) -> float:
        return 1.0 / (self.nx + 1)

    @property
    def dy(self) -> float:
        return 1.0 / (self.ny + 1)

    @property
    def dz(self) -> float:
        return 1.0 / (self.nz + 1)

    def spacing(self) -> tuple[float, float, float]:
        return (self.dx, self.dy, self.dz)

    def axis_coords(self, axis: str) -> np.ndarray:
        """Physical coordinates of the interior points along 'x', 'y' or 'z'."""
        n = {"x": self.nx, "y": self.ny, "z": self.nz}[axis]
        return (np.arange(1, n + 1, dtype=np.float64)) / (n + 1)

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(X, Y, Z) coordinate arrays of shape (nz, ny, nx)."""
        z, y, x = np.meshgrid(
            self.axis_coords("z"),
            self.axis_coords("y"),
            self.axis_coords("x"),
            indexing="ij",
        )
        return x, y, z


def linear_index(g: Grid3D, ix: int, iy: int, iz: int) -> int:
    """Flat index of the point (ix, iy, iz); x varies fastest."""
    if not (0 <= ix < g.nx and 0 <= iy < g.ny and 0 <= iz < g.nz):
        raise IndexError(
            f"point ({ix},{iy},{iz}) outside grid {g.nx}x{g.ny}x{g.nz}"
        )
    return ix + g.nx * (iy + g.ny * iz)


@dataclass
class Field:
    """Flat value array bound to a grid.

    ``values`` has length ``grid.n`` and one of the supported scalar kinds
    (f32, f64, c128).  The ``as3d`` view exposes the same memory with shape
    ``(nz, ny, nx)``.
    """

    grid: Grid3D
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values)
        if self.values.ndim != 1 or self.values.shape[0] != self.grid.n:
            raise GridMismatchError(
                f"field length {self.values.shape} does not match grid "
                f"{self.grid.nx}x{self.grid.ny}x{self.grid.nz} (n={self.grid.n})"
            )
        kind_of(self.values)  # raises on unsupported dtype

    @property
    def kind(self) -> str:
        return kind_of(self.values)

    @property
    def as3d(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape)

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy())

    def same_grid(self, other: "Field") -> bool:
        return self.grid == other.grid


def zeros_field(g: Grid3D, kind: str = "f64") -> Field:
    return Field(g, np.zeros(g.n, dtype=SCALAR_KINDS[kind]))


def eval_on_grid(g: Grid3D, f, kind: str = "f64") -> Field:
    """Sample a scalar function f(x, y, z) at the interior points.

    Tries a vectorized call on coordinate arrays first and falls back to a
    pointwise loop for plain-math callables.  Non-finite results raise
    EvaluationError naming the offending point.
    """
    x, y, z = g.meshgrid()
    try:
        vals = np.asarray(f(x, y, z), dtype=np.complex128 if kind == "c128" else np.float64)
        if vals.shape != x.shape:
            vals = np.broadcast_to(vals, x.shape).copy()
    except (TypeError, ValueError):
        out = np.empty(g.shape, dtype=np.complex128 if kind == "c128" else np.float64)
        it = np.nditer(out, flags=["multi_index"], op_flags=["writeonly"])
        for cell in it:
            iz, iy, ix = it.multi_index
            cell[...] = f(x[iz, iy, ix], y[iz, iy, ix], z[iz, iy, ix])
        vals = out

    bad = ~np.isfinite(vals)
    if bad.any():
        iz, iy, ix = np.unravel_index(int(np.argmax(bad)), vals.shape)
        raise EvaluationError(
            f"function returned non-finite value at point (ix={ix},iy={iy},iz={iz}) "
            f"= ({x[iz, iy, ix]:.6g},{y[iz, iy, ix]:.6g},{z[iz, iy, ix]:.6g})"
        )
    return Field(g, vals.reshape(g.n).astype(SCALAR_KINDS[kind]))


# ---------------------------------------------------------------------------
# Field import/export.
#
# Binary layout: little-endian header of 3 x u64 (nx, ny, nz) + 1 x u8 scalar
# kind code, followed by the raw little-endian values.

_HEADER = struct.Struct("<QQQB")


def write_field_binary(f: Field, path) -> None:
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(f.grid.nx, f.grid.ny, f.grid.nz, _KIND_CODES[f.kind]))
        fh.write(np.ascontiguousarray(f.values, dtype=SCALAR_KINDS[f.kind]).tobytes())


def read_field_binary(path) -> Field:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise EvaluationError(f"{path}: truncated field header")
        nx, ny, nz, code = _HEADER.unpack(head)
        if code not in _CODE_KINDS:
            raise EvaluationError(f"{path}: unknown scalar kind code {code}")
        kind = _CODE_KINDS[code]
        g = Grid3D(int(nx), int(ny), int(nz))
        raw = fh.read()
    dt = SCALAR_KINDS[kind]
    if len(raw) != g.n * dt.itemsize:
        raise EvaluationError(
            f"{path}: expected {g.n * dt.itemsize} value bytes, got {len(raw)}"
        )
    return Field(g, np.frombuffer(raw, dtype=dt).copy())


def write_field_csv(f: Field, path) -> None:
    """(index, value) rows for small grids; header comment carries the dims."""
    with open(path, "w") as fh:
        fh.write(f"# grid {f.grid.nx} {f.grid.ny} {f.grid.nz} {f.kind}\n")
        fh.write("index,value\n")
        if f.kind == "c128":
            for i, v in enumerate(f.values):
                fh.write(f"{i},{complex(v)!r}\n")
        else:
            for i, v in enumerate(f.values):
                fh.write(f"{i},{float(v)!r}\n")


def read_field_csv(path) -> Field:
    with open(path) as fh:
        head = fh.readline().split()
        if len(head) != 6 or head[0] != "#" or head[1] != "grid":
            raise EvaluationError(f"{path}: missing '# grid nx ny nz kind' header")
        g = Grid3D(int(head[2]), int(head[3]), int(head[4]))
        kind = head[5]
        if kind not in SCALAR_KINDS:
            raise EvaluationError(f"{path}: unknown scalar kind {kind!r}")
        fh.readline()  # column header
        vals = np.empty(g.n, dtype=SCALAR_KINDS[kind])
        count = 0
        for line in fh:
            line = line.strip()
            if not line:
                continue
            idx_s, val_s = line.split(",", 1)
            i = int(idx_s)
            vals[i] = complex(val_s) if kind == "c128" else float(val_s)
            count += 1
        if count != g.n:
            raise EvaluationError(f"{path}: expected {g.n} rows, got {count}")
    return Field(g, vals)
